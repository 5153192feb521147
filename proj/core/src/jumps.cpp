#include "kfbi/jumps.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "kfbi/error.hpp"

namespace kfbi {

std::array<double, 2> first_derivative_jumps(const Vec2& tau, double dphi_ds, double psi) {
  // The matrix [[t1, t2], [t2, -t1]] is its own inverse for unit tau.
  return {tau.x * dphi_ds + tau.y * psi, tau.y * dphi_ds - tau.x * psi};
}

std::array<double, 3> second_derivative_jumps(const Vec2& tau, const Vec2& dtau, double wx, double wy,
                                              double d2phi, double dpsi, double f_jump, double kappa, double phi) {
  const double t1 = tau.x, t2 = tau.y;
  Eigen::Matrix3d A;
  A << t1 * t1, 2.0 * t1 * t2, t2 * t2,
       t1 * t2, t2 * t2 - t1 * t1, -t1 * t2,
       1.0, 0.0, 1.0;
  const Eigen::Vector3d rhs(d2phi - (dtau.x * wx + dtau.y * wy), dpsi - dtau.y * wx + dtau.x * wy,
                            f_jump + kappa * phi);
  const double det = A.determinant();
  if (!(std::abs(det) >= 0.5)) throw InternalFault("second_derivative_jumps: singular system (|tau| != 1?)");
  const Eigen::Vector3d x = A.partialPivLu().solve(rhs);
  return {x[0], x[1], x[2]};
}

JumpValues jumps_at(const BoundaryCurve::Frame& frame, const PeriodicCubicSpline::Eval& phi,
                    const PeriodicCubicSpline::Eval& psi, double f_jump, double kappa) {
  JumpValues j;
  j.w = phi.value;
  const auto g = first_derivative_jumps(frame.tangent, phi.d1, psi.value);
  j.wx = g[0];
  j.wy = g[1];
  const auto H = second_derivative_jumps(frame.tangent, tangent_derivative(frame), j.wx, j.wy, phi.d2, psi.d1,
                                         f_jump, kappa, phi.value);
  j.wxx = H[0];
  j.wxy = H[1];
  j.wyy = H[2];
  return j;
}

JumpSet jumps_from_density(const BoundaryNodeSet& nodes, const BoundaryFunction& phi, const BoundaryFunction& psi,
                           const std::vector<double>& f_jump, double kappa) {
  if (phi.size() != nodes.M || psi.size() != nodes.M) {
    throw ConfigError("jumps_from_density: density length does not match node count");
  }
  JumpSet out;
  out.length = nodes.length;
  out.at.resize(nodes.M);
  for (int m = 0; m < nodes.M; ++m) {
    BoundaryCurve::Frame f{nodes.points[m], nodes.tangents[m], nodes.normals[m], nodes.curvature[m]};
    const double s = nodes.arclength[m];
    out.at[m] = jumps_at(f, phi.eval(s), psi.eval(s), f_jump.empty() ? 0.0 : f_jump[m], kappa);
  }
  return out;
}

namespace {

constexpr std::array<double JumpValues::*, 6> kJumpFields = {&JumpValues::w,   &JumpValues::wx,  &JumpValues::wy,
                                                              &JumpValues::wxx, &JumpValues::wxy, &JumpValues::wyy};

}  // namespace

JumpInterpolant::JumpInterpolant(const JumpSet& jumps) {
  const std::size_t M = jumps.at.size();
  std::vector<double> v(M);
  for (std::size_t q = 0; q < kJumpFields.size(); ++q) {
    for (std::size_t m = 0; m < M; ++m) v[m] = jumps.at[m].*kJumpFields[q];
    splines_[q] = PeriodicCubicSpline::uniform(v, jumps.length);
  }
}

JumpValues JumpInterpolant::at(double s) const {
  JumpValues j;
  for (std::size_t q = 0; q < kJumpFields.size(); ++q) j.*kJumpFields[q] = splines_[q].value(s);
  return j;
}

JumpValues transfer_jumps_to_crossing(const JumpSet& jumps, double s) { return JumpInterpolant(jumps).at(s); }

}  // namespace kfbi
