#include "kfbi/hybrid.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "kfbi/error.hpp"

namespace kfbi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

BoundaryFunction predict_density(const KfbiSolver& solver, const PreparedProblem& p, const OperatorModel& model,
                                 const std::vector<double>& params) {
  if (model.M() != solver.M()) {
    throw ConfigError("model M = " + std::to_string(model.M()) + " does not match the problem's M = " +
                      std::to_string(solver.M()));
  }
  return solver.boundary_function(model.infer(params, p.modified.values()));
}

StrategyResult strategy1(const KfbiSolver& solver, const PreparedProblem& p, const OperatorModel& model,
                         const std::vector<double>& params) {
  StrategyResult r;
  const auto t0 = Clock::now();
  r.density = predict_density(solver, p, model, params);
  r.inference_seconds = seconds_since(t0);
  r.solution = solver.assemble_solution(p, r.density);
  r.report.converged = true;
  return r;
}

StrategyResult strategy2(const KfbiSolver& solver, const PreparedProblem& p, const OperatorModel& model,
                         const std::vector<double>& params, const RichardsonOptions& opt) {
  StrategyResult r;
  const auto t0 = Clock::now();
  const BoundaryFunction start = predict_density(solver, p, model, params);
  r.inference_seconds = seconds_since(t0);
  auto [density, report] = solver.richardson_solve(p, start, opt);
  r.density = std::move(density);
  r.report = std::move(report);
  r.solution = solver.assemble_solution(p, r.density);
  return r;
}

// ---- suite ------------------------------------------------------------------

BenchmarkSuite BenchmarkSuite::from_doc(const KeyValueDoc& doc, const std::filesystem::path& base_dir) {
  BenchmarkSuite s;
  for (const auto& e : doc.entries()) {
    const std::string where = doc.source() + ":" + std::to_string(e.line) + ": ";
    if (e.key == "problem") {
      std::filesystem::path p = e.value;
      s.problems.push_back(p.is_absolute() || base_dir.empty() ? p : base_dir / p);
    } else if (e.key == "grids") {
      for (double g : parse_numbers(e.value)) {
        if (g < 8 || g != static_cast<int>(g)) throw ConfigError(where + "grids must be integers >= 8");
        s.grids.push_back(static_cast<int>(g));
      }
    } else if (e.key == "methods") {
      s.methods = split_ws(e.value);
      for (const auto& m : s.methods) {
        if (m != "standard" && m != "strategy1" && m != "strategy2") {
          throw ConfigError(where + "unknown method '" + m + "'");
        }
      }
    } else if (e.key == "model") {
      s.model = e.value;
    } else if (e.key.rfind("model_", 0) == 0) {
      int g = 0;
      try {
        g = std::stoi(e.key.substr(6));
      } catch (const std::exception&) {
        throw ConfigError(where + "expected model_<grid>");
      }
      s.grid_models.emplace_back(g, e.value);
    } else if (e.key == "params") {
      s.params = parse_numbers(e.value);
    } else if (e.key == "repeats") {
      s.repeats = static_cast<int>(doc.get_int("repeats", 3));
      if (s.repeats < 1) throw ConfigError(where + "repeats must be >= 1");
    } else {
      throw ConfigError(where + "unknown key '" + e.key + "'");
    }
  }
  auto resolve = [&](std::string& m) {
    if (m == "oracle" || m == "zero" || m == "none") return;
    std::filesystem::path p = m;
    if (!p.is_absolute() && !base_dir.empty()) m = (base_dir / p).string();
  };
  resolve(s.model);
  for (auto& gm : s.grid_models) resolve(gm.second);
  return s;
}

BenchmarkSuite BenchmarkSuite::load(const std::filesystem::path& path) {
  return from_doc(KeyValueDoc::load(path), path.parent_path());
}

std::string BenchmarkSuite::model_for(int grid) const {
  for (const auto& [g, m] : grid_models) {
    if (g == grid) return m;
  }
  return model;
}

std::string BenchmarkReport::csv_header() {
  return "problem,grid,method,status,linf,l2,iterations,wall_seconds,time_saved,inference_seconds,"
         "inference_iterations,message";
}

void BenchmarkReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.precision(6);
  out << csv_header() << '\n';
  for (const auto& r : rows) {
    out << csv_escape(r.problem) << ',' << r.grid << ',' << r.method << ',' << r.status << ',' << std::scientific
        << r.linf << ',' << r.l2 << ',' << std::defaultfloat << r.iterations << ',' << r.wall_seconds << ','
        << r.time_saved << ',' << r.inference_seconds << ',' << r.inference_iterations << ','
        << csv_escape(r.message) << '\n';
  }
}

namespace {

std::vector<BenchmarkRow> run_problem(const BenchmarkSuite& suite, const std::filesystem::path& problem_path) {
  std::vector<BenchmarkRow> out;
  {
    const std::string pname = problem_path.stem().string();
    std::optional<ProblemSpec> base;
    std::string load_error;
    try {
      base = ProblemSpec::load(problem_path);
    } catch (const Error& e) {
      load_error = e.what();
    }
    std::vector<int> grids = suite.grids;
    if (grids.empty()) grids.push_back(base ? std::max(base->I, base->J) : 0);
    for (int grid : grids) {
      auto fail_all = [&](const std::string& msg) {
        for (const auto& m : suite.methods) {
          BenchmarkRow row;
          row.problem = pname, row.grid = grid, row.method = m, row.status = "failed", row.message = msg;
          out.push_back(row);
        }
      };
      if (!base) {
        fail_all(load_error);
        continue;
      }
      ProblemSpec spec = *base;
      if (!suite.grids.empty()) {
        // Refine the problem's grid to N x N and tie M to the grid.
        spec.I = spec.J = grid;
        spec.M = grid;
      }
      try {
        const KfbiSolver solver = KfbiSolver::from_problem(spec);
        const ProblemData data = spec.data(solver.nodes());

        // The standard run always executes first: it is the reference for
        // time saved and provides the oracle density.
        std::vector<double> t_std;
        StandardResult ref;
        for (int k = 0; k < suite.repeats; ++k) {
          const auto t0 = Clock::now();
          const PreparedProblem p = solver.prepare(data);
          ref = solve_standard(solver, p, spec.richardson, spec.initial);
          t_std.push_back(seconds_since(t0));
        }
        const double t_standard = median(t_std);
        const double per_iter = ref.report.iterations > 0 ? t_standard / ref.report.iterations : 0.0;

        // "oracle" stands for a perfect model (the converged standard
        // density); "zero" for a model predicting zeros.
        const std::string model_name = suite.model_for(grid);
        const bool oracle = model_name == "oracle";
        std::optional<OperatorModel> model;
        std::string model_error;
        if (model_name == "zero") {
          LinearOperatorModel z;
          z.M = solver.M();
          z.W = Matrix::Zero(z.M, z.M);
          model = OperatorModel(std::move(z));
        } else if (!oracle && model_name != "none") {
          try {
            model = load_weights(model_name);
          } catch (const Error& e) {
            model_error = e.what();
          }
        }

        for (const auto& method : suite.methods) {
          BenchmarkRow row;
          row.problem = pname, row.grid = grid, row.method = method;
          if (method == "standard") {
            row.iterations = ref.report.iterations;
            row.wall_seconds = t_standard;
            if (ref.solution.errors) row.linf = ref.solution.errors->linf, row.l2 = ref.solution.errors->l2;
            if (!ref.report.converged) row.status = "failed", row.message = "not converged";
            out.push_back(row);
            continue;
          }
          if (!model && !oracle) {
            row.status = "failed";
            row.message = model_error.empty() ? "no model for this grid" : model_error;
            out.push_back(row);
            continue;
          }
          try {
            std::vector<double> times;
            StrategyResult res;
            for (int k = 0; k < suite.repeats; ++k) {
              const auto t0 = Clock::now();
              const PreparedProblem p = solver.prepare(data);
              if (oracle) {
                const auto ti = Clock::now();
                const BoundaryFunction start = solver.boundary_function(ref.density.values());
                const double inf_s = seconds_since(ti);
                if (method == "strategy1") {
                  res = StrategyResult{solver.assemble_solution(p, start), start, {}, inf_s};
                  res.report.converged = true;
                } else {
                  auto [d, rep] = solver.richardson_solve(p, start, spec.richardson);
                  res = StrategyResult{solver.assemble_solution(p, d), d, rep, inf_s};
                }
              } else if (method == "strategy1") {
                res = strategy1(solver, p, *model, suite.params);
              } else {
                res = strategy2(solver, p, *model, suite.params, spec.richardson);
              }
              times.push_back(seconds_since(t0));
            }
            row.wall_seconds = median(times);
            row.iterations = res.report.iterations;
            row.inference_seconds = res.inference_seconds;
            row.inference_iterations = per_iter > 0.0 ? res.inference_seconds / per_iter : 0.0;
            row.time_saved = t_standard > 0.0 ? 1.0 - row.wall_seconds / t_standard : 0.0;
            if (res.solution.errors) row.linf = res.solution.errors->linf, row.l2 = res.solution.errors->l2;
            if (!res.report.converged) row.status = "failed", row.message = "not converged";
          } catch (const Error& e) {
            row.status = "failed";
            row.message = e.what();
          }
          out.push_back(row);
        }
      } catch (const Error& e) {
        spdlog::warn("bench: {} at grid {}: {}", pname, grid, e.what());
        fail_all(e.what());
      }
    }
  }
  return out;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkSuite& suite, int threads) {
  std::vector<std::vector<BenchmarkRow>> per(suite.problems.size());
  const int n = static_cast<int>(suite.problems.size());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int k = 0; k < n; ++k) per[static_cast<std::size_t>(k)] = run_problem(suite, suite.problems[static_cast<std::size_t>(k)]);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int k = next++; k < n; k = next++) {
          per[static_cast<std::size_t>(k)] = run_problem(suite, suite.problems[static_cast<std::size_t>(k)]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  BenchmarkReport report;
  for (auto& rows : per) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace kfbi
