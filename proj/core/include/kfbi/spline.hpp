#pragma once

#include <span>
#include <vector>

namespace kfbi {

/// Interpolating C² cubic spline on a periodic domain [0, period).
///
/// Knots are strictly increasing in [0, period); the last interval wraps
/// from the final knot back to knots[0] + period.
class PeriodicCubicSpline {
 public:
  struct Eval {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
  };

  PeriodicCubicSpline() = default;
  PeriodicCubicSpline(std::vector<double> knots, std::vector<double> values, double period);

  /// Knots at k * period / n.
  static PeriodicCubicSpline uniform(std::span<const double> values, double period);

  Eval eval(double s) const;
  double value(double s) const { return eval(s).value; }
  double derivative(double s) const { return eval(s).d1; }
  double second_derivative(double s) const { return eval(s).d2; }

  /// One-sided second derivatives at knot k (left limit, right limit).
  std::pair<double, double> second_derivative_limits(std::size_t k) const;

  std::size_t size() const { return knots_.size(); }
  double period() const { return period_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  /// Second derivatives at the knots.
  const std::vector<double>& moments() const { return moments_; }

 private:
  std::size_t locate(double s) const;
  Eval eval_interval(std::size_t k, double s) const;

  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> moments_;
  double period_ = 0.0;
  bool uniform_ = false;
};

/// Solves the cyclic tridiagonal system
///   lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]  (indices mod n).
std::vector<double> solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs);

}  // namespace kfbi
