#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kfbi/boundary.hpp"
#include "kfbi/catalog.hpp"
#include "kfbi/curve.hpp"
#include "kfbi/grid.hpp"
#include "kfbi/interface_solver.hpp"
#include "kfbi/keyvalue.hpp"

namespace kfbi {

enum class BcKind { Dirichlet, Neumann };
enum class ToleranceMode { Relative, Absolute };

struct RichardsonOptions {
  double gamma = 0.75;
  double tol = 1e-8;
  ToleranceMode mode = ToleranceMode::Relative;
  int max_iter = 500;
};

struct IterationReport {
  int iterations = 0;            // operator applications
  std::vector<double> history;   // max-norm of each update
  bool converged = false;
  double wall_seconds = 0.0;
};

/// Per-solve data: source, boundary values at the nodes, optional exact solution.
struct ProblemData {
  BcKind bc = BcKind::Dirichlet;
  ScalarField source;                       // f; empty means f = 0
  std::vector<double> g;                    // g_D or g_N at the M nodes
  std::optional<ManufacturedSolution> exact;
};

struct ErrorNorms {
  double linf = 0.0;
  double l2 = 0.0;   // sqrt(h^2 sum e^2) over interior nodes
};

struct SolutionField {
  GridField u;                       // valid at interior nodes only
  std::vector<std::uint8_t> valid;   // 1 at interior nodes
  std::optional<ErrorNorms> errors;
};

/// Problem data after the one-time volume solve.
struct PreparedProblem {
  ProblemData data;
  BoundaryFunction g;            // raw boundary data
  BoundaryFunction modified;     // g~_D = g_D - (Yf)+  or  g^_N = g_N - d_n(Yf)+
  bool has_source = false;
};

/// Text problem description (key = value). Curve keys as in CurveDescriptor,
/// plus:
///
///     operator = laplace | poisson | modified-helmholtz
///     kappa = 0
///     box = x_lo x_hi y_lo y_hi
///     grid = I J
///     M = 256                       # default max(I, J)
///     bc = dirichlet | neumann
///     solution = laplace1           # catalog preset or term list
///     source = <term list>          # f directly, when no solution is given
///     boundary_values = v0 v1 ...   # raw g at the M nodes
///     gamma, tol, tol_mode = relative | absolute, max_iter, initial = 2g | zero
struct ProblemSpec {
  std::string op = "laplace";
  double kappa = 0.0;
  CurveDescriptor curve;
  std::array<double, 4> box{-1.2, 1.2, -1.2, 1.2};
  int I = 128;
  int J = 128;
  int M = 128;
  BcKind bc = BcKind::Dirichlet;
  std::optional<ManufacturedSolution> solution;
  std::optional<ManufacturedSolution> source;
  std::vector<double> boundary_values;
  RichardsonOptions richardson;
  std::string initial = "2g";

  static ProblemSpec from_doc(const KeyValueDoc& doc);
  static ProblemSpec load(const std::filesystem::path& path);
  KeyValueDoc to_doc() const;
  static std::vector<std::string> keys();

  GridContext grid() const { return {box[0], box[1], box[2], box[3], I, J}; }
  /// Boundary data and source for the given node set.
  ProblemData data(const BoundaryNodeSet& nodes) const;
};

/// Boundary integral solver for one (curve, grid, M, kappa).
///
/// Potentials are realized as interface problems:
///   double layer  W~phi : F = 0,  Phi = phi, Psi = 0   -> v+
///   volume        Yf    : F = f~, Phi = 0,   Psi = 0
///   single layer        : F = 0,  Phi = 0,   Psi = psi -> d_n v+
class KfbiSolver {
 public:
  KfbiSolver(const BoundaryCurve& curve, const GridContext& grid, int M, double kappa);
  static KfbiSolver from_problem(const ProblemSpec& spec);

  const BoundaryCurve& curve() const { return curve_; }
  const BoundaryNodeSet& nodes() const { return interface_.nodes(); }
  const InterfaceSolver& interface() const { return interface_; }
  const GridContext& grid() const { return interface_.grid(); }
  double kappa() const { return kappa_; }
  int M() const { return nodes().M; }

  BoundaryFunction boundary_function(std::vector<double> values) const;

  BoundaryTrace double_layer(const BoundaryFunction& phi) const;
  InterfaceSolution volume_potential(const ScalarField& f, bool want_normal) const;
  BoundaryTrace single_layer_flux(const BoundaryFunction& psi) const;

  /// One volume solve; fills the modified boundary data.
  PreparedProblem prepare(ProblemData data) const;

  /// The boundary operator whose fixed point is sought: W~phi (Dirichlet)
  /// or d_n(v_S psi)+ (Neumann).
  std::vector<double> apply(BcKind bc, const BoundaryFunction& density) const;

  /// phi_{k+1} = phi_k + c gamma (g_mod - A phi_k), c = 2 (Dirichlet) or 1 (Neumann).
  std::pair<BoundaryFunction, IterationReport> richardson_solve(const PreparedProblem& p,
                                                                const BoundaryFunction& initial,
                                                                const RichardsonOptions& opt) const;

  /// Default initial guess: 2 g_D for Dirichlet, zero for Neumann, or zero when `initial` is "zero".
  BoundaryFunction initial_guess(const PreparedProblem& p, const std::string& initial = "2g") const;

  /// u = W phi + Y f (Dirichlet) or u = Y f + v_S psi (Neumann) at interior nodes.
  SolutionField assemble_solution(const PreparedProblem& p, const BoundaryFunction& density) const;

  ErrorNorms errors(const GridField& u, const ManufacturedSolution& exact, bool pin_mean) const;

 private:
  BoundaryCurve curve_;
  double kappa_;
  InterfaceSolver interface_;
};

/// Full standard solve of a problem file: prepare, iterate, assemble.
struct StandardResult {
  SolutionField solution;
  BoundaryFunction density;
  IterationReport report;
};
StandardResult solve_standard(const KfbiSolver& solver, const PreparedProblem& p, const RichardsonOptions& opt,
                              const std::string& initial = "2g");

/// Grid-refinement study: the problem solved on N x N grids with M = N.
/// With an exact solution, orders come from successive errors; otherwise
/// (or with `self`) from differences between successive solutions at the
/// coarser grid's interior nodes (grids must then divide each other).
struct ConvergenceRow {
  int N = 0;
  int iterations = 0;
  bool converged = false;
  std::optional<ErrorNorms> errors;
  double self_diff = 0.0;   // max |u_N - u_prev| at shared nodes (self mode)
  double order = 0.0;       // 0 for the first row
  double seconds = 0.0;
};
std::vector<ConvergenceRow> convergence_study(const ProblemSpec& base, const std::vector<int>& grids, bool self);

}  // namespace kfbi
