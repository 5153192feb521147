#pragma once

#include <array>
#include <vector>

#include "kfbi/boundary.hpp"
#include "kfbi/curve.hpp"
#include "kfbi/spline.hpp"
#include "kfbi/vec2.hpp"

namespace kfbi {

/// Jumps [w] = w+ - w- (+ is the interior side) of a function and its first
/// and second partial derivatives at one boundary point.
struct JumpValues {
  double w = 0.0;
  double wx = 0.0;
  double wy = 0.0;
  double wxx = 0.0;
  double wxy = 0.0;
  double wyy = 0.0;

  /// Taylor polynomial of the jump at offset d from the boundary point.
  double taylor(const Vec2& d) const {
    return w + wx * d.x + wy * d.y + 0.5 * wxx * d.x * d.x + wxy * d.x * d.y + 0.5 * wyy * d.y * d.y;
  }
};

/// Solves  t1 [wx] + t2 [wy] = dPhi/ds,  t2 [wx] - t1 [wy] = Psi.
std::array<double, 2> first_derivative_jumps(const Vec2& tau, double dphi_ds, double psi);

/// Solves the 3x3 system obtained by differentiating the first-order
/// relations along the boundary, closed by [wxx] + [wyy] = f_jump + kappa Phi.
std::array<double, 3> second_derivative_jumps(const Vec2& tau, const Vec2& dtau_ds, double wx, double wy,
                                              double d2phi_ds2, double dpsi_ds, double f_jump, double kappa,
                                              double phi);

/// dtau/ds = curvature * (-t2, t1).
inline Vec2 tangent_derivative(const BoundaryCurve::Frame& f) { return f.curvature * Vec2{-f.tangent.y, f.tangent.x}; }

/// All six jumps at a boundary point from the spline data of Phi and Psi.
JumpValues jumps_at(const BoundaryCurve::Frame& frame, const PeriodicCubicSpline::Eval& phi,
                    const PeriodicCubicSpline::Eval& psi, double f_jump, double kappa);

/// Jumps at every node of a node set. `f_jump[m]` may be empty (all zero).
struct JumpSet {
  std::vector<JumpValues> at;
  double length = 0.0;
};

JumpSet jumps_from_density(const BoundaryNodeSet& nodes, const BoundaryFunction& phi, const BoundaryFunction& psi,
                           const std::vector<double>& f_jump, double kappa);

/// Periodic splines in arclength through each nodal jump quantity.
class JumpInterpolant {
 public:
  explicit JumpInterpolant(const JumpSet& jumps);
  JumpValues at(double s) const;

 private:
  std::array<PeriodicCubicSpline, 6> splines_;
};

/// Interpolates each nodal jump quantity in arclength (periodic spline) at s.
JumpValues transfer_jumps_to_crossing(const JumpSet& jumps, double s);

}  // namespace kfbi
