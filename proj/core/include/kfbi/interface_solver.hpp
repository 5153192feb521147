#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "kfbi/boundary.hpp"
#include "kfbi/classify.hpp"
#include "kfbi/curve.hpp"
#include "kfbi/fast_solver.hpp"
#include "kfbi/grid.hpp"
#include "kfbi/jumps.hpp"

namespace kfbi {

using ScalarField = std::function<double(const Vec2&)>;

/// Right-hand side F of the interface problem.
///
/// Analytic: F = f inside the domain and 0 outside (zero extension), so the
/// jump of F at the boundary is the interior trace of f.
/// Sampled: nodal values used as given, assumed continuous across the boundary.
struct SourceTerm {
  enum class Kind { Zero, Analytic, Sampled };
  Kind kind = Kind::Zero;
  ScalarField f;
  GridField sampled;

  static SourceTerm zero() { return {}; }
  static SourceTerm analytic(ScalarField fn) { return {Kind::Analytic, std::move(fn), {}}; }
  static SourceTerm from_field(GridField field) { return {Kind::Sampled, {}, std::move(field)}; }
};

/// Interface problem on the box B:
///   (Delta - kappa) v = F  in B \ Gamma,   [v] = Phi,  [d_n v] = Psi  on Gamma,  v = 0 on dB.
struct InterfaceSpec {
  SourceTerm F;
  BoundaryFunction phi;
  BoundaryFunction psi;
  double kappa = 0.0;
};

/// One-sided boundary values at the M nodes.
struct BoundaryTrace {
  std::vector<double> value;
  std::vector<double> normal_derivative;  // empty unless requested
};

struct InterfaceSolution {
  GridField field;
  BoundaryTrace trace;
};

/// Second-order interface solver for one (curve, grid, node set, kappa).
///
/// Construction classifies the grid, locates crossings and factors the trace
/// stencils; solve() is then one right-hand-side correction, one fast solve
/// and one stencil application. Immutable after construction.
class InterfaceSolver {
 public:
  InterfaceSolver(const BoundaryCurve& curve, const GridContext& grid, const BoundaryNodeSet& nodes, double kappa,
                  double clearance_cells = 2.0);

  /// Grid actually used (may be shifted by 1e-9 h to avoid tangencies).
  const GridContext& grid() const { return class_.grid; }
  const NodeClassification& classification() const { return class_; }
  const BoundaryNodeSet& nodes() const { return nodes_; }
  double kappa() const { return kappa_; }
  int fallback_stencils() const { return fallback_count_; }

  /// Five-point right-hand side with jump corrections at irregular nodes.
  GridField corrected_rhs(const InterfaceSpec& spec) const;

  /// Quadratic 6-point reconstruction of the one-sided limits at the nodes.
  /// `interior_side` selects v+ (default) or v-.
  BoundaryTrace interpolate_trace(const GridField& field, const InterfaceSpec& spec, bool want_normal,
                                  bool interior_side = true) const;

  InterfaceSolution solve(const InterfaceSpec& spec, bool want_normal = false) const;

  /// Jumps at boundary node m for this spec.
  JumpValues node_jumps(const InterfaceSpec& spec, int m) const;

  /// Jumps at crossing k, evaluated from the density splines at its arclength.
  JumpValues crossing_jumps(const InterfaceSpec& spec, int k) const;

  /// Jumps at all boundary nodes for this spec.
  JumpSet node_jump_set(const InterfaceSpec& spec) const;

 private:
  struct Stencil {
    std::vector<int> ii, jj;
    std::vector<Vec2> offset;             // node - z
    Eigen::Matrix<double, 3, Eigen::Dynamic> weights;  // rows: V, Vx, Vy
    bool fallback = false;
  };

  Stencil build_stencil(int m, bool interior_side) const;
  void check_spec(const InterfaceSpec& spec) const;

  BoundaryCurve curve_;
  BoundaryNodeSet nodes_;
  double kappa_;
  NodeClassification class_;
  std::unique_ptr<FastSolver> fast_;
  std::vector<BoundaryCurve::Frame> crossing_frames_;
  std::vector<Stencil> stencils_;
  int fallback_count_ = 0;
};

/// One-shot convenience wrapper.
InterfaceSolution solve_interface(const BoundaryCurve& curve, const GridContext& grid, const BoundaryNodeSet& nodes,
                                  const InterfaceSpec& spec, bool want_normal = false);

}  // namespace kfbi
