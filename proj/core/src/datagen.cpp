#include "kfbi/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "kfbi/container.hpp"
#include "kfbi/error.hpp"

namespace kfbi {

namespace {

constexpr const char* kDatasetMagic = "KFBID1";

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

const std::vector<std::string>& datagen_keys() {
  static const std::vector<std::string> k = {"records",    "param",        "param_points", "families",
                                             "terms",      "coef_range",   "freq_range",   "max_degree",
                                             "pole_order", "pole_distance", "screen_factor", "expected_error",
                                             "seed"};
  return k;
}

std::array<double, 2> range2(const KeyValueDoc& doc, const std::string& key, std::array<double, 2> fallback) {
  if (!doc.has(key)) return fallback;
  const auto v = doc.get_doubles(key);
  if (v.size() != 2 || !(v[0] <= v[1])) throw ConfigError(doc.where(key) + "expected 'lo hi' with lo <= hi");
  return {v[0], v[1]};
}

ParamAxis parse_axis(const std::string& text, const std::string& where) {
  const auto w = split_ws(text);
  if (w.size() < 4) throw ConfigError(where + "expected '<name> uniform|int|grid lo hi [count]'");
  ParamAxis a;
  a.name = w[0];
  a.sampling = w[1];
  const auto lo = parse_numbers(w[2]), hi = parse_numbers(w[3]);
  a.lo = lo.at(0);
  a.hi = hi.at(0);
  if (!(a.lo <= a.hi)) throw ConfigError(where + "lo must not exceed hi");
  if (a.sampling == "grid") {
    if (w.size() != 5) throw ConfigError(where + "grid axis needs a count");
    a.count = static_cast<int>(parse_numbers(w[4]).at(0));
    if (a.count < 1) throw ConfigError(where + "grid count must be >= 1");
  } else if (a.sampling == "uniform" || a.sampling == "int") {
    if (w.size() != 4) throw ConfigError(where + "unexpected trailing fields");
  } else {
    throw ConfigError(where + "unknown sampling '" + a.sampling + "'");
  }
  return a;
}

void apply_param(ProblemSpec& s, const std::string& name, double v) {
  auto& c = s.curve;
  if (name == "kappa") s.kappa = v;
  else if (name == "ra") c.ra = v;
  else if (name == "rb") c.rb = v;
  else if (name == "alpha") c.alpha = v;
  else if (name == "sm") c.star_m = static_cast<int>(std::lround(v));
  else if (name == "sc") c.star_c = v;
  else if (name == "rotate") c.rotate = v;
  else if (name == "scale") c.scale = v;
  else if (name == "cx") c.cx = v;
  else if (name == "cy") c.cy = v;
  else if (name.rfind("perturb.", 0) == 0) {
    const auto dot = name.find('.', 8);
    if (dot == std::string::npos || (name.substr(dot + 1) != "x" && name.substr(dot + 1) != "y")) {
      throw ConfigError("param: expected perturb.<index>.x or perturb.<index>.y, got '" + name + "'");
    }
    const int index = std::stoi(name.substr(8, dot - 8));
    auto it = std::find_if(c.perturbations.begin(), c.perturbations.end(),
                           [&](const ControlPointPerturbation& p) { return p.index == index; });
    if (it == c.perturbations.end()) {
      c.perturbations.push_back({index, {0.0, 0.0}});
      it = c.perturbations.end() - 1;
    }
    (name.back() == 'x' ? it->offset.x : it->offset.y) = v;
  } else {
    throw ConfigError("param: unknown parameter '" + name + "'");
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

SolutionTerm random_term(const DatagenConfig& cfg, const std::string& family, const BoundaryCurve& curve,
                         const BoundaryNodeSet& nodes, std::mt19937_64& rng) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double a = uniform(rng, cfg.freq_range[0], cfg.freq_range[1]);
  SolutionTerm t;
  if (family == "harmonic") {
    static const char* kinds[] = {"exp_cos", "exp_sin", "sin_sinh", "cosh_cos", "wave", "hpoly"};
    t.kind = kinds[uniform_int(rng, 0, 5)];
    if (t.kind == "wave") {
      t.params = {a, uniform(rng, 0.0, two_pi), uniform(rng, 0.0, two_pi)};
    } else if (t.kind == "hpoly") {
      Vec2 c{0.0, 0.0};
      for (const auto& p : nodes.points) c = c + p;
      c = c * (1.0 / nodes.M);
      double R = 0.0;
      for (const auto& p : nodes.points) R = std::max(R, norm(p - c));
      t.params = {static_cast<double>(uniform_int(rng, 0, cfg.max_degree)), uniform(rng, 0.0, two_pi), c.x, c.y, R};
    } else {
      t.params = {a};
    }
  } else if (family == "pole") {
    t.kind = "pole";
    for (int attempt = 0; attempt < 100; ++attempt) {
      const int m = uniform_int(rng, 0, nodes.M - 1);
      const double d = uniform(rng, cfg.pole_distance[0], cfg.pole_distance[1]);
      const Vec2 z0 = nodes.points[m] + nodes.normals[m] * d;
      double closest = 1e300;
      for (const auto& p : nodes.points) closest = std::min(closest, norm(p - z0));
      if (curve.inside(z0) || closest < 0.5 * d) continue;
      t.params = {static_cast<double>(uniform_int(rng, cfg.pole_order[0], cfg.pole_order[1])),
                  uniform(rng, 0.0, two_pi), z0.x, z0.y, d};
      return t;
    }
    throw ConfigError("datagen: could not place a pole outside the domain; reduce pole_distance");
  } else if (family == "smooth") {
    switch (uniform_int(rng, 0, 2)) {
      case 0:
        t.kind = "exp_lin";
        t.params = {a * (uniform_int(rng, 0, 1) ? 1.0 : -1.0), uniform(rng, -cfg.freq_range[1], cfg.freq_range[1])};
        break;
      case 1:
        t.kind = "sin_cos";
        t.params = {a, uniform(rng, cfg.freq_range[0], cfg.freq_range[1])};
        break;
      default:
        t.kind = "poly";
        t.params = {static_cast<double>(uniform_int(rng, 0, 3)), static_cast<double>(uniform_int(rng, 0, 3))};
        break;
    }
  } else {
    throw ConfigError("datagen: unknown family '" + family + "'");
  }
  return t;
}

}  // namespace

// ---- KFBID1 -----------------------------------------------------------------

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  Container c;
  c.magic = kDatasetMagic;
  c.header.set("M", std::to_string(ds.M));
  c.header.set("P", std::to_string(ds.P()));
  if (ds.P() > 0) {
    std::string names;
    for (const auto& n : ds.param_names) names += (names.empty() ? "" : " ") + n;
    c.header.set("param_names", names);
  }
  c.header.set("count", std::to_string(ds.records.size()));
  c.header.set("byte_order", "little");
  c.header.set("element", "float64");
  c.header.set("record_layout", "params g phi provenance");
  for (const auto& e : ds.info.entries()) c.header.add("info." + e.key, e.value);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (static_cast<int>(r.params.size()) != ds.P() || static_cast<int>(r.g.size()) != ds.M ||
        static_cast<int>(r.phi.size()) != ds.M) {
      throw InternalFault("write_dataset: record " + std::to_string(i) + " has inconsistent lengths");
    }
    append_f64(c.payload, r.params);
    append_f64(c.payload, r.g);
    append_f64(c.payload, r.phi);
    append_u32(c.payload, static_cast<std::uint32_t>(r.provenance.size()));
    c.payload.insert(c.payload.end(), r.provenance.begin(), r.provenance.end());
  }
  write_container(path, c);
}

Dataset read_dataset(const std::filesystem::path& path) {
  const Container c = read_container(path, kDatasetMagic);
  const KeyValueDoc& h = c.header;
  Dataset ds;
  for (const auto& e : h.entries()) {
    if (e.key.rfind("info.", 0) == 0) {
      ds.info.add(e.key.substr(5), e.value);
    } else if (e.key != "M" && e.key != "P" && e.key != "param_names" && e.key != "count" && e.key != "byte_order" &&
               e.key != "element" && e.key != "record_layout") {
      throw ConfigError(path.string() + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  if (h.get("byte_order").value_or("little") != "little" || h.get("element").value_or("float64") != "float64") {
    throw ConfigError(path.string() + ": only little-endian float64 datasets are supported");
  }
  ds.M = static_cast<int>(h.require_int("M"));
  const long P = h.require_int("P");
  if (ds.M <= 0 || P < 0) throw ConfigError(path.string() + ": bad M or P");
  if (P > 0) ds.param_names = split_ws(h.require("param_names"));
  if (static_cast<long>(ds.param_names.size()) != P) {
    throw ConfigError(h.where("param_names") + "expected " + std::to_string(P) + " names");
  }
  const long count = h.require_int("count");
  if (count < 0) throw ConfigError(h.where("count") + "must be >= 0");
  PayloadReader in(c.payload, path.string());
  ds.records.resize(static_cast<std::size_t>(count));
  for (auto& r : ds.records) {
    r.params.resize(static_cast<std::size_t>(P));
    r.g.resize(static_cast<std::size_t>(ds.M));
    r.phi.resize(static_cast<std::size_t>(ds.M));
    in.f64(r.params);
    in.f64(r.g);
    in.f64(r.phi);
    r.provenance = in.bytes(in.u32());
  }
  if (in.remaining() != 0) {
    throw ConfigError(path.string() + ": " + std::to_string(in.remaining()) + " trailing payload bytes");
  }
  return ds;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "record,kind,index,value\n";
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    const auto& rec = ds.records[r];
    for (std::size_t i = 0; i < rec.params.size(); ++i) out << r << ",param," << i << ',' << rec.params[i] << '\n';
    for (std::size_t i = 0; i < rec.g.size(); ++i) out << r << ",g," << i << ',' << rec.g[i] << '\n';
    for (std::size_t i = 0; i < rec.phi.size(); ++i) out << r << ",phi," << i << ',' << rec.phi[i] << '\n';
  }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(ds.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rng = seeded(seed, 0x5b1170);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  Dataset train, test;
  for (Dataset* d : {&train, &test}) {
    d->M = ds.M;
    d->param_names = ds.param_names;
    d->info = ds.info;
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train : test).records.push_back(ds.records[order[k]]);
  }
  train.info.set("split", "train " + num(fraction) + " seed " + std::to_string(seed));
  test.info.set("split", "test " + num(1.0 - fraction) + " seed " + std::to_string(seed));
  return {std::move(train), std::move(test)};
}

// ---- configuration ----------------------------------------------------------

DatagenConfig DatagenConfig::from_doc(const KeyValueDoc& doc) {
  const auto problem_keys = ProblemSpec::keys();
  KeyValueDoc problem;
  for (const auto& e : doc.entries()) {
    if (std::find(problem_keys.begin(), problem_keys.end(), e.key) != problem_keys.end()) {
      problem.add(e.key, e.value);
    } else if (std::find(datagen_keys().begin(), datagen_keys().end(), e.key) == datagen_keys().end()) {
      throw ConfigError(doc.source() + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  if (problem.has("solution") || problem.has("boundary_values") || problem.has("source")) {
    throw ConfigError(doc.source() + ": datagen draws its own solutions; remove solution/source/boundary_values");
  }
  problem.set("solution", "zero");
  DatagenConfig c;
  c.base = ProblemSpec::from_doc(problem);
  c.base.solution.reset();
  c.records = static_cast<int>(doc.get_int("records", c.records));
  if (c.records < 1) throw ConfigError(doc.where("records") + "must be >= 1");
  for (const auto& e : doc.entries()) {
    if (e.key == "param") c.axes.push_back(parse_axis(e.value, doc.source() + ":" + std::to_string(e.line) + ": "));
  }
  c.param_points = static_cast<int>(doc.get_int("param_points", c.axes.empty() ? 1 : 20));
  if (c.param_points < 1) throw ConfigError(doc.where("param_points") + "must be >= 1");
  if (c.axes.empty()) c.param_points = 1;
  if (doc.has("families")) c.families = split_ws(doc.require("families"));
  for (const auto& f : c.families) {
    if (f != "harmonic" && f != "pole" && f != "smooth") {
      throw ConfigError(doc.where("families") + "unknown family '" + f + "'");
    }
    if (f == "smooth" && c.base.op == "laplace") {
      throw ConfigError(doc.where("families") + "the smooth family needs a source term; use operator = poisson");
    }
  }
  if (c.families.empty()) throw ConfigError(doc.where("families") + "at least one family required");
  const auto terms = range2(doc, "terms", {1.0, 3.0});
  c.min_terms = static_cast<int>(terms[0]);
  c.max_terms = static_cast<int>(terms[1]);
  if (c.min_terms < 1) throw ConfigError(doc.where("terms") + "need at least one term");
  c.coef_range = range2(doc, "coef_range", c.coef_range);
  c.freq_range = range2(doc, "freq_range", c.freq_range);
  c.max_degree = static_cast<int>(doc.get_int("max_degree", c.max_degree));
  const auto po = range2(doc, "pole_order", {1.0, 2.0});
  c.pole_order = {static_cast<int>(po[0]), static_cast<int>(po[1])};
  if (c.pole_order[0] < 1) throw ConfigError(doc.where("pole_order") + "orders start at 1");
  c.pole_distance = range2(doc, "pole_distance", c.pole_distance);
  if (!(c.pole_distance[0] > 0.0)) throw ConfigError(doc.where("pole_distance") + "must be positive");
  c.screen_factor = doc.get_double("screen_factor", c.screen_factor);
  c.expected_error = doc.get_double("expected_error", c.expected_error);
  if (!(c.screen_factor > 0.0) || !(c.expected_error > 0.0)) {
    throw ConfigError(doc.source() + ": screen_factor and expected_error must be positive");
  }
  c.seed = static_cast<std::uint64_t>(doc.get_int("seed", 1));
  // Fail early on bad parameter names.
  ProblemSpec probe = c.base;
  for (const auto& a : c.axes) apply_param(probe, a.name, a.lo);
  return c;
}

DatagenConfig DatagenConfig::load(const std::filesystem::path& path) { return from_doc(KeyValueDoc::load(path)); }

KeyValueDoc DatagenConfig::to_doc() const {
  KeyValueDoc d = base.to_doc();
  d.set("records", std::to_string(records));
  for (const auto& a : axes) {
    d.add("param", a.name + " " + a.sampling + " " + num(a.lo) + " " + num(a.hi) +
                       (a.sampling == "grid" ? " " + std::to_string(a.count) : ""));
  }
  d.set("param_points", std::to_string(param_points));
  std::string fam;
  for (const auto& f : families) fam += (fam.empty() ? "" : " ") + f;
  d.set("families", fam);
  d.set("terms", std::to_string(min_terms) + " " + std::to_string(max_terms));
  d.set("coef_range", num(coef_range[0]) + " " + num(coef_range[1]));
  d.set("freq_range", num(freq_range[0]) + " " + num(freq_range[1]));
  d.set("max_degree", std::to_string(max_degree));
  d.set("pole_order", std::to_string(pole_order[0]) + " " + std::to_string(pole_order[1]));
  d.set("pole_distance", num(pole_distance[0]) + " " + num(pole_distance[1]));
  d.set("screen_factor", num(screen_factor));
  d.set("expected_error", num(expected_error));
  d.set("seed", std::to_string(seed));
  return d;
}

ProblemSpec DatagenConfig::spec_at(const std::vector<double>& values) const {
  if (values.size() != axes.size()) throw InternalFault("spec_at: parameter count mismatch");
  ProblemSpec s = base;
  for (std::size_t k = 0; k < axes.size(); ++k) apply_param(s, axes[k].name, values[k]);
  return s;
}

// ---- generation -------------------------------------------------------------

int GenerationLog::accepted() const {
  return static_cast<int>(std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.accepted; }));
}

int GenerationLog::rejected() const { return static_cast<int>(outcomes.size()) - accepted(); }

int GenerationLog::nonconverged() const {
  return static_cast<int>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return !o.converged; }));
}

void GenerationLog::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "# attempted " << outcomes.size() << " accepted " << accepted() << " rejected " << rejected()
      << " nonconverged " << nonconverged() << '\n';
  out << "attempt point iterations converged accepted error expected reason solution\n";
  out.precision(6);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    out << i << ' ' << o.point << ' ' << o.iterations << ' ' << o.converged << ' ' << o.accepted << ' '
        << std::scientific << o.error << ' ' << o.expected << std::defaultfloat << ' '
        << (o.reason.empty() ? "-" : o.reason) << ' ' << o.solution << '\n';
  }
}

double expected_discretization_error(const ManufacturedSolution& u, const BoundaryNodeSet& nodes, double h,
                                     double c) {
  constexpr double d = 1e-4;
  double d1 = 0.0, d2 = 0.0, d3 = 0.0, scale = 0.0;
  for (const auto& p : nodes.points) {
    const Jet j = u.jet(p);
    const Jet xp = u.jet(p + Vec2{d, 0.0}), xm = u.jet(p - Vec2{d, 0.0});
    const Jet yp = u.jet(p + Vec2{0.0, d}), ym = u.jet(p - Vec2{0.0, d});
    const double uxxx = (xp.uxx - xm.uxx) / (2 * d);
    const double uxxy = (yp.uxx - ym.uxx) / (2 * d);
    const double uxyy = (xp.uyy - xm.uyy) / (2 * d);
    const double uyyy = (yp.uyy - ym.uyy) / (2 * d);
    scale = std::max(scale, std::abs(j.u));
    d1 = std::max({d1, std::abs(j.ux), std::abs(j.uy)});
    d2 = std::max({d2, std::abs(j.uxx), std::abs(j.uxy), std::abs(j.uyy)});
    d3 = std::max({d3, std::abs(uxxx), std::abs(uxxy), std::abs(uxyy), std::abs(uyyy)});
  }
  // Floor at the iteration-tolerance level.
  return c * h * h * (d1 + d2 + d3) + 1e-8 * scale;
}

ManufacturedSolution draw_solution(const DatagenConfig& cfg, const KfbiSolver& solver, std::mt19937_64& rng) {
  const auto& nodes = solver.nodes();
  const int nterms = uniform_int(rng, cfg.min_terms, cfg.max_terms);
  std::string text;
  for (int k = 0; k < nterms; ++k) {
    const std::string& family = cfg.families[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(cfg.families.size()) - 1))];
    SolutionTerm t = random_term(cfg, family, solver.curve(), nodes, rng);
    double peak = 0.0;
    for (const auto& p : nodes.points) peak = std::max(peak, std::abs(t.jet(p).u));
    if (!(peak > 1e-12) || !std::isfinite(peak)) {
      --k;
      continue;
    }
    t.coef = uniform(rng, cfg.coef_range[0], cfg.coef_range[1]) / peak;
    std::string piece = t.kind + " " + num(t.coef);
    for (double v : t.params) piece += " " + num(v);
    text += (text.empty() ? "" : " | ") + piece;
  }
  return ManufacturedSolution::parse(text);
}

std::optional<DatasetRecord> generate_record(const KfbiSolver& solver, const ProblemSpec& spec,
                                             const ManufacturedSolution& u, const std::vector<double>& params,
                                             double screen_factor, double expected_error_coef,
                                             RecordOutcome* outcome) {
  RecordOutcome o;
  o.solution = u.to_string();
  ProblemSpec s = spec;
  s.solution = u;
  const PreparedProblem p = solver.prepare(s.data(solver.nodes()));
  const StandardResult r = solve_standard(solver, p, s.richardson, s.initial);
  o.iterations = r.report.iterations;
  o.converged = r.report.converged;
  o.error = r.solution.errors ? r.solution.errors->linf : 0.0;
  o.expected = expected_discretization_error(u, solver.nodes(), solver.grid().h(), expected_error_coef);
  std::optional<DatasetRecord> rec;
  if (!o.converged) {
    o.reason = "not-converged";
  } else if (!std::isfinite(o.error) || o.error > screen_factor * o.expected + 1e-12) {
    o.reason = "error-screen";
  } else {
    o.accepted = true;
    DatasetRecord d;
    d.params = params;
    d.g = p.modified.values();
    d.phi = r.density.values();
    d.provenance = "u = " + u.to_string() + "; grid = " + std::to_string(solver.grid().I()) + " " +
                   std::to_string(solver.grid().J()) + "; M = " + std::to_string(solver.M());
    rec = std::move(d);
  }
  if (outcome) *outcome = o;
  return rec;
}

Dataset generate_dataset(const DatagenConfig& cfg, GenerationLog* log, int threads) {
  // Parameter points are drawn sequentially from one stream; each point then
  // gets its own stream, so the output does not depend on `threads`.
  const int npts = cfg.param_points;
  std::vector<std::vector<double>> points(static_cast<std::size_t>(npts));
  auto prng = seeded(cfg.seed, 0xfffffffful);
  for (int k = 0; k < npts; ++k) {
    for (const auto& a : cfg.axes) {
      double v = 0.0;
      if (a.sampling == "uniform") v = uniform(prng, a.lo, a.hi);
      else if (a.sampling == "int") v = uniform_int(prng, static_cast<int>(a.lo), static_cast<int>(a.hi));
      else v = a.count == 1 ? a.lo : a.lo + (a.hi - a.lo) * (k % a.count) / double(a.count - 1);
      points[static_cast<std::size_t>(k)].push_back(v);
    }
  }

  struct PointResult {
    std::vector<DatasetRecord> records;
    std::vector<RecordOutcome> outcomes;
  };
  std::vector<PointResult> results(static_cast<std::size_t>(npts));

  auto run_point = [&](int k) {
    const int n = cfg.records / npts + (k < cfg.records % npts ? 1 : 0);
    auto& res = results[static_cast<std::size_t>(k)];
    const auto& values = points[static_cast<std::size_t>(k)];
    const ProblemSpec spec = cfg.spec_at(values);
    std::optional<KfbiSolver> solver;
    try {
      solver.emplace(KfbiSolver::from_problem(spec));
    } catch (const Error& e) {
      for (int i = 0; i < n; ++i) res.outcomes.push_back({k, 0, false, false, 0.0, 0.0, "setup-failed", ""});
      spdlog::warn("datagen: parameter point {} skipped: {}", k, e.what());
      return;
    }
    auto rng = seeded(cfg.seed, static_cast<std::uint64_t>(k));
    for (int i = 0; i < n; ++i) {
      const ManufacturedSolution u = draw_solution(cfg, *solver, rng);
      RecordOutcome o;
      auto rec = generate_record(*solver, spec, u, values, cfg.screen_factor, cfg.expected_error, &o);
      o.point = k;
      if (rec) res.records.push_back(std::move(*rec));
      res.outcomes.push_back(std::move(o));
    }
  };

  threads = std::max(1, std::min(threads, npts));
  if (threads == 1) {
    for (int k = 0; k < npts; ++k) run_point(k);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int k = next++; k < npts; k = next++) {
          try {
            run_point(k);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!err) err = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }

  Dataset ds;
  ds.M = cfg.base.M;
  for (const auto& a : cfg.axes) ds.param_names.push_back(a.name);
  ds.info = cfg.to_doc();
  GenerationLog local;
  for (auto& r : results) {
    for (auto& rec : r.records) ds.records.push_back(std::move(rec));
    for (auto& o : r.outcomes) local.outcomes.push_back(std::move(o));
  }
  spdlog::info("datagen: {} records accepted, {} rejected ({} not converged)", local.accepted(), local.rejected(),
               local.nonconverged());
  if (log) *log = std::move(local);
  return ds;
}

}  // namespace kfbi
