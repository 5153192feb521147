#include "kfbi/boundary.hpp"

#include <algorithm>

#include "kfbi/error.hpp"

namespace kfbi {

double BoundaryNodeSet::spacing_ratio() const {
  double lo = 1e300, hi = 0.0;
  for (int m = 0; m < M; ++m) {
    const double d = norm(points[(m + 1) % M] - points[m]);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return hi / lo;
}

BoundaryNodeSet sample_quasi_uniform(const BoundaryCurve& curve, int M) {
  if (M < 4) throw ConfigError("sample_quasi_uniform: need M >= 4, got " + std::to_string(M));
  BoundaryNodeSet n;
  n.M = M;
  n.length = curve.length();
  n.points.resize(M);
  n.tangents.resize(M);
  n.normals.resize(M);
  n.curvature.resize(M);
  n.arclength.resize(M);
  n.parameter.resize(M);
  for (int m = 0; m < M; ++m) {
    const double s = n.length * m / M;
    const double t = m == 0 ? 0.0 : curve.parameter_at(s);
    const auto f = curve.frame_at_parameter(t);
    n.points[m] = f.pos;
    n.tangents[m] = f.tangent;
    n.normals[m] = f.normal;
    n.curvature[m] = f.curvature;
    n.arclength[m] = s;
    n.parameter[m] = t;
  }
  return n;
}

BoundaryFunction::BoundaryFunction(std::vector<double> values, double length)
    : values_(std::move(values)), length_(length) {
  zero_ = std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  if (!zero_) spline_ = PeriodicCubicSpline::uniform(values_, length_);
}

PeriodicCubicSpline::Eval BoundaryFunction::eval(double s) const {
  if (zero_) return {};
  return spline_.eval(s);
}

}  // namespace kfbi
