#pragma once

#include <span>
#include <vector>

#include "kfbi/curve.hpp"
#include "kfbi/spline.hpp"
#include "kfbi/vec2.hpp"

namespace kfbi {

/// M boundary nodes, uniform in arclength, counterclockwise, s_0 = 0.
struct BoundaryNodeSet {
  int M = 0;
  double length = 0.0;
  std::vector<Vec2> points;
  std::vector<Vec2> tangents;
  std::vector<Vec2> normals;
  std::vector<double> curvature;
  std::vector<double> arclength;
  std::vector<double> parameter;

  double spacing_ratio() const;
};

BoundaryNodeSet sample_quasi_uniform(const BoundaryCurve& curve, int M);

/// Nodal values of a scalar boundary function with its periodic spline in
/// arclength (used for s-derivatives and off-node evaluation).
class BoundaryFunction {
 public:
  BoundaryFunction() = default;
  BoundaryFunction(std::vector<double> values, double length);

  static BoundaryFunction zeros(int M, double length) { return {std::vector<double>(M, 0.0), length}; }

  int size() const { return static_cast<int>(values_.size()); }
  double length() const { return length_; }
  double operator[](std::size_t m) const { return values_[m]; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

  const PeriodicCubicSpline& spline() const { return spline_; }
  PeriodicCubicSpline::Eval eval(double s) const;

 private:
  std::vector<double> values_;
  double length_ = 0.0;
  PeriodicCubicSpline spline_;
  bool zero_ = true;
};

}  // namespace kfbi
