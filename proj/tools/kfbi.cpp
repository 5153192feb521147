// kfbi: command line front end.
//
// Exit codes: 0 ok, 1 internal error, 2 configuration error, 3 numerical
// failure (non-convergence, golden mismatch), 4 missing artifact.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "kfbi/bie.hpp"
#include "kfbi/container.hpp"
#include "kfbi/datagen.hpp"
#include "kfbi/error.hpp"
#include "kfbi/hybrid.hpp"
#include "kfbi/operator_model.hpp"
#include "kfbi/version.hpp"

namespace fs = std::filesystem;
using namespace kfbi;

namespace {

struct Globals {
  long seed = -1;   // < 0: keep the config's seed
  int threads = 1;
  std::string out_dir;
  std::string log_level = "warn";
};

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string fmt_e(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::path p = name;
  if (p.is_absolute()) return p;
  return fs::path(g.out_dir) / p;
}

// config echo + versions + seed beside the outputs
void write_manifest(const Globals& g, const std::string& command, const std::vector<std::string>& argv,
                    const KeyValueDoc& config, const std::vector<fs::path>& outputs) {
  KeyValueDoc m;
  m.set("command", command);
  std::string line;
  for (const auto& a : argv) line += (line.empty() ? "" : " ") + a;
  m.set("argv", line);
  m.set("seed", std::to_string(g.seed));
  m.set("threads", std::to_string(g.threads));
  for (const auto& [k, v] : build_info()) m.set("version." + k, v);
  for (const auto& e : config.entries()) m.add("config." + e.key, e.value);
  for (const auto& o : outputs) m.add("output", o.string());
  const fs::path path = out_path(g, command + ".manifest");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << m.to_string();
}

Matrix rows_of(const Dataset& ds, bool phi) {
  Matrix X(static_cast<Eigen::Index>(ds.records.size()), ds.M);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& v = phi ? ds.records[i].phi : ds.records[i].g;
    for (int m = 0; m < ds.M; ++m) X(static_cast<Eigen::Index>(i), m) = v[static_cast<std::size_t>(m)];
  }
  return X;
}

std::vector<double> read_vector(const std::string& spec) {
  // Either a file of numbers or the numbers themselves.
  std::error_code ec;
  if (fs::is_regular_file(spec, ec)) {
    std::ifstream in(spec);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_numbers(ss.str());
  }
  return parse_numbers(spec);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  Globals g;
  if (const char* env = std::getenv("KFBI_OUT_DIR")) g.out_dir = env;
  if (g.out_dir.empty()) g.out_dir = ".";

  CLI::App app{"Kernel-free boundary integral solver with learned-operator strategies"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.add_option("--seed", g.seed, "Random seed (overrides config seeds)");
  app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory (default $KFBI_OUT_DIR or .)");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  // solve
  std::string problem_path, format = "binary", field_name;
  double tol = -1.0, gamma = -1.0;
  int max_iter = -1, grid_n = -1;
  std::string initial;
  auto* solve = app.add_subcommand("solve", "Standard KFBI solve of a problem file");
  solve->add_option("problem", problem_path, "Problem file")->required();
  solve->add_option("--tol", tol, "Richardson tolerance");
  solve->add_option("--gamma", gamma, "Richardson relaxation");
  solve->add_option("--max-iter", max_iter, "Iteration cap");
  solve->add_option("--grid", grid_n, "N x N grid (M = N)");
  solve->add_option("--initial", initial, "2g | zero");
  solve->add_option("--format", format, "Field dump format")->check(CLI::IsMember({"binary", "csv", "none"}));
  solve->add_option("--field", field_name, "Field file name (default <problem>.kfbif / .csv)");

  // datagen
  std::string datagen_config, dataset_name, log_name;
  int records = -1;
  bool csv_export = false;
  auto* datagen = app.add_subcommand("datagen", "Generate a KFBID1 training dataset");
  datagen->add_option("config", datagen_config, "Dataset config file")->required();
  datagen->add_option("--out", dataset_name, "Dataset file name (default <config>.kfbid)");
  datagen->add_option("--log", log_name, "Generation log name (default <dataset>.log)");
  datagen->add_option("--records", records, "Override the record count");
  datagen->add_flag("--csv", csv_export, "Also write a CSV export");

  // split
  std::string split_input;
  double fraction = 0.8;
  auto* split = app.add_subcommand("split", "Seeded train/test split of a dataset");
  split->add_option("dataset", split_input, "KFBID1 file")->required();
  split->add_option("--fraction", fraction, "Training fraction");

  // train-linear
  std::string train_input, weights_name, layout = "direct";
  int bottleneck_d = 4;
  double ridge = 0.0;
  std::string test_input;
  auto* train = app.add_subcommand("train-linear", "Least-squares fit of a linear operator model");
  train->add_option("dataset", train_input, "KFBID1 file")->required();
  train->add_option("--test", test_input, "Held-out dataset (default: split the input)");
  train->add_option("--fraction", fraction, "Training fraction when splitting");
  train->add_option("--layout", layout, "direct | bottleneck")->check(CLI::IsMember({"direct", "bottleneck"}));
  train->add_option("--d", bottleneck_d, "Bottleneck divisor");
  train->add_option("--ridge", ridge, "Ridge strength");
  train->add_option("--out", weights_name, "Weights file name (default <dataset>.kfbiw)");

  // infer
  std::string infer_weights, infer_input, infer_params;
  auto* infer = app.add_subcommand("infer", "Run a weights file on one input vector");
  infer->add_option("weights", infer_weights, "KFBIW1 file")->required();
  infer->add_option("input", infer_input, "File of M numbers, or the numbers themselves")->required();
  infer->add_option("--params", infer_params, "Parameter vector (param models)");

  // bench
  std::string suite_path, bench_csv = "bench.csv";
  bool parallel = false;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("suite", suite_path, "Suite file")->required();
  bench->add_option("--csv", bench_csv, "CSV output name");
  bench->add_flag("--parallel", parallel, "Run problems concurrently (timings unreliable)");

  // convergence
  std::string conv_problem;
  std::vector<int> grids{64, 128, 256, 512};
  bool self_conv = false;
  auto* conv = app.add_subcommand("convergence", "Grid-refinement study with observed orders");
  conv->add_option("problem", conv_problem, "Problem file")->required();
  conv->add_option("--grids", grids, "Grid sizes")->expected(2, 16);
  conv->add_flag("--self", self_conv, "Self-convergence against the next finer grid");

  // describe
  std::string describe_path;
  auto* describe = app.add_subcommand("describe", "Print the header of a KFBIW1/KFBID1/KFBIF1 file");
  describe->add_option("file", describe_path, "File")->required();

  // verify-golden
  std::string golden_weights, golden_path;
  double golden_tol = 1e-10;
  auto* golden = app.add_subcommand("verify-golden", "Check a weights file against golden vectors");
  golden->add_option("weights", golden_weights, "KFBIW1 file")->required();
  golden->add_option("golden", golden_path, "KFBIG1 file")->required();
  golden->add_option("--tol", golden_tol, "Max abs deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    fs::create_directories(g.out_dir);

    if (*solve) {
      KeyValueDoc doc = KeyValueDoc::load(problem_path);
      ProblemSpec spec = ProblemSpec::from_doc(doc);
      if (tol > 0.0) spec.richardson.tol = tol;
      if (gamma > 0.0) spec.richardson.gamma = gamma;
      if (max_iter > 0) spec.richardson.max_iter = max_iter;
      if (grid_n > 0) spec.I = spec.J = spec.M = grid_n;
      if (!initial.empty()) spec.initial = initial;
      const auto t0 = std::chrono::steady_clock::now();
      const KfbiSolver solver = KfbiSolver::from_problem(spec);
      const PreparedProblem p = solver.prepare(spec.data(solver.nodes()));
      const StandardResult r = solve_standard(solver, p, spec.richardson, spec.initial);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::vector<fs::path> outputs;
      if (format != "none") {
        const std::string stem = fs::path(problem_path).stem().string();
        const fs::path field = out_path(g, field_name.empty() ? stem + (format == "csv" ? ".csv" : ".kfbif") : field_name);
        if (format == "csv") write_field_csv(field, solver.grid(), r.solution.u);
        else write_field(field, solver.grid(), r.solution.u);
        outputs.push_back(field);
      }
      std::cout << "iterations=" << r.report.iterations << " converged=" << (r.report.converged ? 1 : 0);
      if (r.solution.errors) {
        std::cout << " linf=" << fmt_e(r.solution.errors->linf) << " l2=" << fmt_e(r.solution.errors->l2);
      }
      std::cout << " seconds=" << fmt_e(secs) << '\n';
      write_manifest(g, "solve", args, spec.to_doc(), outputs);
      if (!r.report.converged) {
        std::cerr << "kfbi: Richardson iteration did not converge in " << spec.richardson.max_iter << " steps\n";
        return 3;
      }
      return 0;
    }

    if (*datagen) {
      DatagenConfig cfg = DatagenConfig::load(datagen_config);
      if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
      if (records > 0) cfg.records = records;
      const std::string stem = fs::path(datagen_config).stem().string();
      const fs::path ds_path = out_path(g, dataset_name.empty() ? stem + ".kfbid" : dataset_name);
      const fs::path log_path = out_path(g, log_name.empty() ? ds_path.filename().string() + ".log" : log_name);
      GenerationLog log;
      const Dataset ds = generate_dataset(cfg, &log, g.threads);
      write_dataset(ds_path, ds);
      log.write(log_path);
      std::vector<fs::path> outputs{ds_path, log_path};
      if (csv_export) {
        const fs::path csv = ds_path.string() + ".csv";
        write_dataset_csv(csv, ds);
        outputs.push_back(csv);
      }
      std::cout << "records=" << ds.records.size() << " attempted=" << log.outcomes.size()
                << " rejected=" << log.rejected() << " nonconverged=" << log.nonconverged() << '\n';
      write_manifest(g, "datagen", args, cfg.to_doc(), outputs);
      return 0;
    }

    if (*split) {
      const Dataset ds = read_dataset(split_input);
      const std::uint64_t seed = g.seed >= 0 ? static_cast<std::uint64_t>(g.seed) : 1;
      auto [tr, te] = split_dataset(ds, fraction, seed);
      const std::string stem = fs::path(split_input).stem().string();
      const fs::path a = out_path(g, stem + ".train.kfbid"), b = out_path(g, stem + ".test.kfbid");
      write_dataset(a, tr);
      write_dataset(b, te);
      std::cout << "train=" << tr.records.size() << " test=" << te.records.size() << '\n';
      KeyValueDoc cfg;
      cfg.set("dataset", split_input);
      cfg.set("fraction", num(fraction));
      write_manifest(g, "split", args, cfg, {a, b});
      return 0;
    }

    if (*train) {
      Dataset ds = read_dataset(train_input);
      Dataset tr, te;
      if (!test_input.empty()) {
        tr = std::move(ds);
        te = read_dataset(test_input);
      } else {
        const std::uint64_t seed = g.seed >= 0 ? static_cast<std::uint64_t>(g.seed) : 1;
        std::tie(tr, te) = split_dataset(ds, fraction, seed);
      }
      if (tr.P() > 0) spdlog::warn("train-linear: ignoring {} parameter columns", tr.P());
      if (static_cast<int>(tr.records.size()) < tr.M) {
        spdlog::warn("train-linear: {} training pairs < M = {}; the fit is rank-deficient", tr.records.size(), tr.M);
      }
      FitOptions opt;
      opt.layout = layout == "direct" ? LinearOperatorModel::Layout::Direct : LinearOperatorModel::Layout::Bottleneck;
      opt.d = bottleneck_d;
      opt.ridge = ridge;
      FitReport rep;
      OperatorModel model(fit_linear(rows_of(tr, false), rows_of(tr, true), opt, &rep));
      model.metadata.set("trainer", "fit_linear");
      model.metadata.set("ridge", num(ridge));
      model.metadata.set("train_records", std::to_string(tr.records.size()));
      double rms = 0.0;
      if (!te.records.empty()) {
        const Matrix T = rows_of(te, true);
        const Matrix P = model.linear().apply_rows(rows_of(te, false));
        rms = std::sqrt((P - T).squaredNorm() / std::max(T.squaredNorm(), 1e-300));
      }
      const std::string stem = fs::path(train_input).stem().string();
      const fs::path w = out_path(g, weights_name.empty() ? stem + ".kfbiw" : weights_name);
      save_weights(model, w);
      std::cout << "train=" << tr.records.size() << " test=" << te.records.size() << " rank=" << rep.rank
                << " loss=" << fmt_e(rep.loss) << " heldout_rel_rms=" << fmt_e(rms) << '\n';
      KeyValueDoc cfg;
      cfg.set("dataset", train_input);
      cfg.set("layout", layout);
      cfg.set("d", std::to_string(bottleneck_d));
      cfg.set("ridge", num(ridge));
      cfg.set("fraction", num(fraction));
      write_manifest(g, "train-linear", args, cfg, {w});
      return 0;
    }

    if (*infer) {
      const OperatorModel model = load_weights(infer_weights);
      const auto x = read_vector(infer_input);
      const auto p = infer_params.empty() ? std::vector<double>{} : read_vector(infer_params);
      const auto y = model.infer(p, x);
      for (std::size_t i = 0; i < y.size(); ++i) std::cout << (i ? " " : "") << num(y[i]);
      std::cout << '\n';
      return 0;
    }

    if (*bench) {
      const BenchmarkSuite suite = BenchmarkSuite::load(suite_path);
      const BenchmarkReport report = run_benchmark(suite, parallel ? g.threads : 1);
      const fs::path csv = out_path(g, bench_csv);
      report.write_csv(csv);
      std::cout << BenchmarkReport::csv_header() << '\n';
      std::ifstream in(csv);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) std::cout << line << '\n';
      write_manifest(g, "bench", args, KeyValueDoc::load(suite_path), {csv});
      return 0;
    }

    if (*conv) {
      const ProblemSpec spec = ProblemSpec::load(conv_problem);
      const auto rows = convergence_study(spec, grids, self_conv);
      const bool self = self_conv || !spec.solution;
      std::cout << (self ? "N iterations self_diff order\n" : "N iterations linf l2 order\n");
      bool all_converged = true;
      for (const auto& r : rows) {
        std::cout << r.N << ' ' << r.iterations << ' ';
        if (self) std::cout << (r.self_diff > 0.0 ? fmt_e(r.self_diff) : "-") << ' ';
        else std::cout << fmt_e(r.errors->linf) << ' ' << fmt_e(r.errors->l2) << ' ';
        std::cout << (r.order != 0.0 ? std::to_string(r.order).substr(0, 5) : "-") << '\n';
        all_converged = all_converged && r.converged;
      }
      write_manifest(g, "convergence", args, spec.to_doc(), {});
      return all_converged ? 0 : 3;
    }

    if (*describe) {
      std::ifstream in(describe_path, std::ios::binary);
      if (!in) throw MissingArtifact("cannot open '" + describe_path + "'");
      std::string magic;
      std::getline(in, magic);
      if (magic != "KFBIW1" && magic != "KFBID1" && magic != "KFBIF1") {
        throw ConfigError(describe_path + ": unknown magic '" + magic.substr(0, 16) + "'");
      }
      const Container c = read_container(describe_path, magic);
      std::cout << magic << '\n' << c.header.to_string() << "payload_bytes = " << c.payload.size() << '\n';
      return 0;
    }

    if (*golden) {
      const OperatorModel model = load_weights(golden_weights);
      const GoldenSet set = read_golden(golden_path);
      const double dev = verify_golden(model, set);
      std::cout << "pairs=" << set.pairs.size() << " max_abs_deviation=" << fmt_e(dev) << '\n';
      return dev <= golden_tol ? 0 : 3;
    }
  } catch (const ConfigError& e) {
    std::cerr << "kfbi: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "kfbi: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const MissingArtifact& e) {
    std::cerr << "kfbi: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "kfbi: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
