#include "kfbi/bie.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "kfbi/error.hpp"

namespace kfbi {

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::vector<std::string> ProblemSpec::keys() {
  std::vector<std::string> k = CurveDescriptor::keys();
  for (const char* s : {"operator", "kappa", "box", "grid", "M", "bc", "solution", "source", "boundary_values",
                        "gamma", "tol", "tol_mode", "max_iter", "initial", "name"}) {
    k.emplace_back(s);
  }
  return k;
}

ProblemSpec ProblemSpec::from_doc(const KeyValueDoc& doc) {
  doc.reject_unknown(keys());
  ProblemSpec p;
  p.op = doc.get("operator").value_or("laplace");
  p.kappa = doc.get_double("kappa", 0.0);
  if (p.op == "laplace" || p.op == "poisson") {
    if (p.kappa != 0.0) throw ConfigError(doc.where("kappa") + "operator '" + p.op + "' requires kappa = 0");
  } else if (p.op == "modified-helmholtz") {
    if (!(p.kappa > 0.0)) throw ConfigError(doc.where("kappa") + "modified-helmholtz requires kappa > 0");
  } else {
    throw ConfigError(doc.where("operator") + "unknown operator '" + p.op + "'");
  }
  p.curve = CurveDescriptor::from_doc(doc);
  if (doc.has("box")) {
    const auto b = doc.get_doubles("box");
    if (b.size() != 4) throw ConfigError(doc.where("box") + "expected 'x_lo x_hi y_lo y_hi'");
    std::copy(b.begin(), b.end(), p.box.begin());
  }
  if (doc.has("grid")) {
    const auto g = doc.get_doubles("grid");
    if (g.size() != 1 && g.size() != 2) throw ConfigError(doc.where("grid") + "expected 'I J' or 'N'");
    p.I = static_cast<int>(g[0]);
    p.J = static_cast<int>(g.size() == 2 ? g[1] : g[0]);
  }
  p.M = static_cast<int>(doc.get_int("M", std::max(p.I, p.J)));
  const std::string bc = doc.get("bc").value_or("dirichlet");
  if (bc == "dirichlet") {
    p.bc = BcKind::Dirichlet;
  } else if (bc == "neumann") {
    p.bc = BcKind::Neumann;
  } else {
    throw ConfigError(doc.where("bc") + "expected dirichlet or neumann, got '" + bc + "'");
  }
  try {
    if (auto s = doc.get("solution")) p.solution = ManufacturedSolution::parse(*s);
    if (auto s = doc.get("source")) p.source = ManufacturedSolution::parse(*s);
  } catch (const ConfigError& e) {
    throw ConfigError(doc.where(doc.has("solution") ? "solution" : "source") + e.what());
  }
  if (doc.has("boundary_values")) p.boundary_values = doc.get_doubles("boundary_values");
  if (!p.solution && p.boundary_values.empty()) {
    throw ConfigError(doc.source() + ": problem needs 'solution' or 'boundary_values'");
  }
  if (p.solution && (p.source || !p.boundary_values.empty())) {
    throw ConfigError(doc.source() + ": 'solution' excludes 'source' and 'boundary_values'");
  }
  if (!p.boundary_values.empty() && static_cast<int>(p.boundary_values.size()) != p.M) {
    throw ConfigError(doc.where("boundary_values") + "expected M = " + std::to_string(p.M) + " values");
  }
  p.richardson.gamma = doc.get_double("gamma", 0.75);
  if (!(p.richardson.gamma > 0.0 && p.richardson.gamma < 1.0)) {
    throw ConfigError(doc.where("gamma") + "gamma must be in (0, 1)");
  }
  p.richardson.tol = doc.get_double("tol", 1e-8);
  const std::string mode = doc.get("tol_mode").value_or("relative");
  if (mode == "relative") {
    p.richardson.mode = ToleranceMode::Relative;
  } else if (mode == "absolute") {
    p.richardson.mode = ToleranceMode::Absolute;
  } else {
    throw ConfigError(doc.where("tol_mode") + "expected relative or absolute");
  }
  p.richardson.max_iter = static_cast<int>(doc.get_int("max_iter", 500));
  p.initial = doc.get("initial").value_or(p.bc == BcKind::Dirichlet ? "2g" : "zero");
  if (p.initial != "2g" && p.initial != "zero") throw ConfigError(doc.where("initial") + "expected 2g or zero");
  if (p.M < 4) throw ConfigError(doc.where("M") + "M must be >= 4");
  return p;
}

ProblemSpec ProblemSpec::load(const std::filesystem::path& path) { return from_doc(KeyValueDoc::load(path)); }

KeyValueDoc ProblemSpec::to_doc() const {
  KeyValueDoc d;
  d.set("operator", op);
  d.set("kappa", num(kappa));
  curve.write_to(d);
  d.set("box", num(box[0]) + " " + num(box[1]) + " " + num(box[2]) + " " + num(box[3]));
  d.set("grid", std::to_string(I) + " " + std::to_string(J));
  d.set("M", std::to_string(M));
  d.set("bc", bc == BcKind::Dirichlet ? "dirichlet" : "neumann");
  if (solution) d.set("solution", solution->to_string());
  if (source) d.set("source", source->to_string());
  if (!boundary_values.empty()) {
    std::string s;
    for (double v : boundary_values) s += (s.empty() ? "" : " ") + num(v);
    d.set("boundary_values", s);
  }
  d.set("gamma", num(richardson.gamma));
  d.set("tol", num(richardson.tol));
  d.set("tol_mode", richardson.mode == ToleranceMode::Relative ? "relative" : "absolute");
  d.set("max_iter", std::to_string(richardson.max_iter));
  d.set("initial", initial);
  return d;
}

ProblemData ProblemSpec::data(const BoundaryNodeSet& nodes) const {
  ProblemData d;
  d.bc = bc;
  if (solution) {
    d.exact = *solution;
    d.g.resize(nodes.M);
    for (int m = 0; m < nodes.M; ++m) {
      d.g[m] = bc == BcKind::Dirichlet ? solution->value(nodes.points[m])
                                       : solution->normal_derivative(nodes.points[m], nodes.normals[m]);
    }
    if (!(solution->harmonic() && kappa == 0.0)) {
      const ManufacturedSolution u = *solution;
      const double k = kappa;
      d.source = [u, k](const Vec2& p) { return u.source(p, k); };
    }
  } else {
    d.g = boundary_values;
    if (source && !source->empty()) {
      const ManufacturedSolution f = *source;
      d.source = [f](const Vec2& p) { return f.value(p); };
    }
  }
  return d;
}

KfbiSolver::KfbiSolver(const BoundaryCurve& curve, const GridContext& grid, int M, double kappa)
    : curve_(curve), kappa_(kappa), interface_(curve, grid, sample_quasi_uniform(curve, M), kappa) {}

KfbiSolver KfbiSolver::from_problem(const ProblemSpec& spec) {
  return KfbiSolver(BoundaryCurve::build(spec.curve), spec.grid(), spec.M, spec.kappa);
}

BoundaryFunction KfbiSolver::boundary_function(std::vector<double> values) const {
  if (static_cast<int>(values.size()) != M()) {
    throw ConfigError("boundary function has " + std::to_string(values.size()) + " values, expected M = " +
                      std::to_string(M()));
  }
  return {std::move(values), nodes().length};
}

BoundaryTrace KfbiSolver::double_layer(const BoundaryFunction& phi) const {
  InterfaceSpec s;
  s.kappa = kappa_;
  s.phi = phi;
  s.psi = BoundaryFunction::zeros(M(), nodes().length);
  return interface_.solve(s).trace;
}

InterfaceSolution KfbiSolver::volume_potential(const ScalarField& f, bool want_normal) const {
  InterfaceSpec s;
  s.kappa = kappa_;
  if (f) s.F = SourceTerm::analytic(f);
  s.phi = BoundaryFunction::zeros(M(), nodes().length);
  s.psi = s.phi;
  return interface_.solve(s, want_normal);
}

BoundaryTrace KfbiSolver::single_layer_flux(const BoundaryFunction& psi) const {
  InterfaceSpec s;
  s.kappa = kappa_;
  s.phi = BoundaryFunction::zeros(M(), nodes().length);
  s.psi = psi;
  return interface_.solve(s, true).trace;
}

PreparedProblem KfbiSolver::prepare(ProblemData data) const {
  PreparedProblem p;
  p.g = boundary_function(data.g);
  p.has_source = static_cast<bool>(data.source);
  std::vector<double> mod = data.g;
  if (p.has_source) {
    const auto y = volume_potential(data.source, data.bc == BcKind::Neumann);
    const auto& tr = data.bc == BcKind::Dirichlet ? y.trace.value : y.trace.normal_derivative;
    for (int m = 0; m < M(); ++m) mod[m] -= tr[m];
  }
  p.modified = boundary_function(std::move(mod));
  p.data = std::move(data);
  return p;
}

std::vector<double> KfbiSolver::apply(BcKind bc, const BoundaryFunction& density) const {
  if (bc == BcKind::Dirichlet) return double_layer(density).value;
  return single_layer_flux(density).normal_derivative;
}

BoundaryFunction KfbiSolver::initial_guess(const PreparedProblem& p, const std::string& initial) const {
  if (initial == "zero" || p.data.bc == BcKind::Neumann) return BoundaryFunction::zeros(M(), nodes().length);
  if (initial != "2g") throw ConfigError("unknown initial guess '" + initial + "'");
  std::vector<double> v = p.g.values();
  for (double& x : v) x *= 2.0;
  return boundary_function(std::move(v));
}

std::pair<BoundaryFunction, IterationReport> KfbiSolver::richardson_solve(const PreparedProblem& p,
                                                                          const BoundaryFunction& initial,
                                                                          const RichardsonOptions& opt) const {
  if (!(opt.gamma > 0.0 && opt.gamma < 1.0)) throw ConfigError("richardson: gamma must be in (0, 1)");
  if (initial.size() != M()) throw ConfigError("richardson: initial density has the wrong length");
  const auto t0 = std::chrono::steady_clock::now();
  const double factor = (p.data.bc == BcKind::Dirichlet ? 2.0 : 1.0) * opt.gamma;
  const auto& target = p.modified.values();
  const double scale = opt.mode == ToleranceMode::Relative ? std::max(max_abs(target), 1e-300) : 1.0;

  IterationReport rep;
  BoundaryFunction phi = initial;
  BoundaryFunction best = initial;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<double> next(M());
  for (int k = 0; k < opt.max_iter; ++k) {
    const auto a = apply(p.data.bc, phi);
    ++rep.iterations;
    double upd = 0.0, res = 0.0;
    for (int m = 0; m < M(); ++m) {
      const double r = target[m] - a[m];
      res = std::max(res, std::abs(r));
      next[m] = phi[m] + factor * r;
      upd = std::max(upd, std::abs(factor * r));
    }
    if (!std::isfinite(upd)) throw NumericalError("richardson: iteration diverged (non-finite update)");
    if (res < best_residual) {
      best_residual = res;
      best = phi;
    }
    rep.history.push_back(upd);
    phi = boundary_function(next);
    if (upd <= opt.tol * scale) {
      rep.converged = true;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!rep.converged) {
    spdlog::warn("richardson: not converged after {} iterations (last update {:.3e})", rep.iterations,
                 rep.history.empty() ? 0.0 : rep.history.back());
    return {best, rep};
  }
  return {phi, rep};
}

SolutionField KfbiSolver::assemble_solution(const PreparedProblem& p, const BoundaryFunction& density) const {
  InterfaceSpec s;
  s.kappa = kappa_;
  if (p.has_source) s.F = SourceTerm::analytic(p.data.source);
  const auto zero = BoundaryFunction::zeros(M(), nodes().length);
  if (p.data.bc == BcKind::Dirichlet) {
    s.phi = density;
    s.psi = zero;
  } else {
    s.phi = zero;
    s.psi = density;
  }
  const auto& g = grid();
  const auto& cls = interface_.classification();
  SolutionField out;
  out.u = interface_.solve(s).field;
  out.valid.assign(g.node_count(), 0);
  for (int j = 0; j <= g.J(); ++j) {
    for (int i = 0; i <= g.I(); ++i) {
      if (cls.is_interior(i, j)) {
        out.valid[g.index(i, j)] = 1;
      } else {
        out.u(i, j) = 0.0;
      }
    }
  }
  if (p.data.exact) {
    out.errors = errors(out.u, *p.data.exact, p.data.bc == BcKind::Neumann && kappa_ == 0.0);
  }
  return out;
}

ErrorNorms KfbiSolver::errors(const GridField& u, const ManufacturedSolution& exact, bool pin_mean) const {
  const auto& g = grid();
  const auto& cls = interface_.classification();
  std::vector<double> diff;
  for (int j = 0; j <= g.J(); ++j) {
    for (int i = 0; i <= g.I(); ++i) {
      if (cls.is_interior(i, j)) diff.push_back(u(i, j) - exact.value(g.node(i, j)));
    }
  }
  if (pin_mean && !diff.empty()) {
    double mean = 0.0;
    for (double d : diff) mean += d;
    mean /= static_cast<double>(diff.size());
    for (double& d : diff) d -= mean;
  }
  ErrorNorms e;
  double sum = 0.0;
  for (double d : diff) {
    e.linf = std::max(e.linf, std::abs(d));
    sum += d * d;
  }
  e.l2 = std::sqrt(sum) * g.h();
  return e;
}

StandardResult solve_standard(const KfbiSolver& solver, const PreparedProblem& p, const RichardsonOptions& opt,
                              const std::string& initial) {
  StandardResult r;
  auto [density, report] = solver.richardson_solve(p, solver.initial_guess(p, initial), opt);
  r.density = std::move(density);
  r.report = std::move(report);
  r.solution = solver.assemble_solution(p, r.density);
  return r;
}

std::vector<ConvergenceRow> convergence_study(const ProblemSpec& base, const std::vector<int>& grids, bool self) {
  if (grids.size() < 2) throw ConfigError("convergence: need at least two grids");
  self = self || !base.solution;
  std::vector<ConvergenceRow> rows;
  std::optional<SolutionField> prev;
  std::optional<GridContext> prev_grid;
  for (int N : grids) {
    if (!rows.empty() && N <= rows.back().N) throw ConfigError("convergence: grids must increase");
    ProblemSpec s = base;
    s.I = s.J = s.M = N;
    const auto t0 = std::chrono::steady_clock::now();
    const KfbiSolver solver = KfbiSolver::from_problem(s);
    const PreparedProblem p = solver.prepare(s.data(solver.nodes()));
    StandardResult r = solve_standard(solver, p, s.richardson, s.initial);
    ConvergenceRow row;
    row.N = N;
    row.iterations = r.report.iterations;
    row.converged = r.report.converged;
    row.errors = r.solution.errors;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (self && prev) {
      const int ratio = N / prev_grid->I();
      if (ratio * prev_grid->I() != N) throw ConfigError("convergence: self mode needs nested grids");
      const bool pin = s.bc == BcKind::Neumann && s.kappa == 0.0;
      std::vector<double> diff;
      for (int j = 0; j <= prev_grid->J(); ++j) {
        for (int i = 0; i <= prev_grid->I(); ++i) {
          const std::size_t a = static_cast<std::size_t>(prev_grid->index(i, j));
          const std::size_t b = static_cast<std::size_t>(solver.grid().index(ratio * i, ratio * j));
          if (prev->valid[a] && r.solution.valid[b]) diff.push_back(r.solution.u(ratio * i, ratio * j) - prev->u(i, j));
        }
      }
      double mean = 0.0;
      if (pin && !diff.empty()) {
        for (double d : diff) mean += d;
        mean /= static_cast<double>(diff.size());
      }
      for (double d : diff) row.self_diff = std::max(row.self_diff, std::abs(d - mean));
      if (rows.size() >= 2 && row.self_diff > 0.0) {
        row.order = std::log(rows.back().self_diff / row.self_diff) / std::log(double(N) / rows.back().N);
      }
    } else if (!self && !rows.empty() && row.errors && rows.back().errors && row.errors->linf > 0.0) {
      row.order = std::log(rows.back().errors->linf / row.errors->linf) / std::log(double(N) / rows.back().N);
    }
    rows.push_back(row);
    prev = std::move(r.solution);
    prev_grid = solver.grid();
  }
  return rows;
}

}  // namespace kfbi
