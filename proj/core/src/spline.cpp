#include "kfbi/spline.hpp"

#include <algorithm>
#include <cmath>

#include "kfbi/error.hpp"

namespace kfbi {

std::vector<double> solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (n < 3) throw ConfigError("cyclic tridiagonal system needs at least 3 unknowns");

  // Sherman-Morrison: A = T + u v^T with T tridiagonal.
  const double corner_top = lower[0];       // A(0, n-1)
  const double corner_bottom = upper[n - 1];  // A(n-1, 0)
  const double gamma = -diag[0];

  std::vector<double> b(diag.begin(), diag.end());
  b[0] -= gamma;
  b[n - 1] -= corner_bottom * corner_top / gamma;

  auto thomas = [&](std::span<const double> d) {
    std::vector<double> c(n), x(n);
    double denom = b[0];
    c[0] = upper[0] / denom;
    x[0] = d[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
      denom = b[i] - lower[i] * c[i - 1];
      c[i] = (i + 1 < n) ? upper[i] / denom : 0.0;
      x[i] = (d[i] - lower[i] * x[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
  };

  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = corner_bottom;
  const auto x = thomas(rhs);
  const auto z = thomas(u);
  // v = (1, 0, ..., 0, corner_top / gamma)
  const double vx = x[0] + corner_top / gamma * x[n - 1];
  const double vz = z[0] + corner_top / gamma * z[n - 1];
  const double factor = vx / (1.0 + vz);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - factor * z[i];
  return out;
}

PeriodicCubicSpline::PeriodicCubicSpline(std::vector<double> knots, std::vector<double> values, double period)
    : knots_(std::move(knots)), values_(std::move(values)), period_(period) {
  const std::size_t n = knots_.size();
  if (n != values_.size()) throw ConfigError("spline: knots and values differ in length");
  if (n < 3) throw ConfigError("spline: need at least 3 knots");
  if (!(period_ > 0.0)) throw ConfigError("spline: period must be positive");
  if (knots_.front() < 0.0 || knots_.back() >= period_) {
    throw ConfigError("spline: knots must lie in [0, period)");
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (!(knots_[k] > knots_[k - 1])) {
      throw ConfigError("spline: knots must be strictly increasing (duplicate at index " + std::to_string(k) +
                        ")");
    }
  }
  if (!(knots_.front() + period_ > knots_.back())) throw ConfigError("spline: degenerate wrap interval");

  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    h[k] = (k + 1 < n ? knots_[k + 1] : knots_[0] + period_) - knots_[k];
  }
  const double h0 = h[0];
  uniform_ = std::all_of(h.begin(), h.end(), [&](double v) { return std::abs(v - h0) <= 1e-12 * h0; });

  std::vector<double> lower(n), diag(n), upper(n), rhs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t km = (k + n - 1) % n;
    const std::size_t kp = (k + 1) % n;
    lower[k] = h[km];
    diag[k] = 2.0 * (h[km] + h[k]);
    upper[k] = h[k];
    rhs[k] = 6.0 * ((values_[kp] - values_[k]) / h[k] - (values_[k] - values_[km]) / h[km]);
  }
  moments_ = solve_cyclic_tridiagonal(lower, diag, upper, rhs);
}

PeriodicCubicSpline PeriodicCubicSpline::uniform(std::span<const double> values, double period) {
  const std::size_t n = values.size();
  std::vector<double> knots(n);
  for (std::size_t k = 0; k < n; ++k) knots[k] = period * static_cast<double>(k) / static_cast<double>(n);
  return PeriodicCubicSpline(std::move(knots), std::vector<double>(values.begin(), values.end()), period);
}

std::size_t PeriodicCubicSpline::locate(double s) const {
  const std::size_t n = knots_.size();
  if (uniform_) {
    const double step = period_ / static_cast<double>(n);
    auto k = static_cast<std::ptrdiff_t>(std::floor((s - knots_[0]) / step));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n) - 1);
    return static_cast<std::size_t>(k);
  }
  if (s < knots_[0]) return n - 1;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
  return static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1;
}

PeriodicCubicSpline::Eval PeriodicCubicSpline::eval_interval(std::size_t k, double s) const {
  const std::size_t n = knots_.size();
  const std::size_t kp = (k + 1) % n;
  const double a = knots_[k];
  const double b = (k + 1 < n) ? knots_[k + 1] : knots_[0] + period_;
  const double h = b - a;
  const double l = b - s;
  const double r = s - a;
  const double mk = moments_[k];
  const double mp = moments_[kp];
  const double ck = values_[k] / h - mk * h / 6.0;
  const double cp = values_[kp] / h - mp * h / 6.0;
  Eval e;
  e.value = mk * l * l * l / (6.0 * h) + mp * r * r * r / (6.0 * h) + ck * l + cp * r;
  e.d1 = -mk * l * l / (2.0 * h) + mp * r * r / (2.0 * h) - ck + cp;
  e.d2 = mk * l / h + mp * r / h;
  return e;
}

PeriodicCubicSpline::Eval PeriodicCubicSpline::eval(double s) const {
  // Reduce to [knots[0], knots[0] + period).
  double t = std::fmod(s - knots_[0], period_);
  if (t < 0.0) t += period_;
  t += knots_[0];
  if (t >= knots_[0] + period_) t = knots_[0];
  const std::size_t k = locate(t);
  // t may sit in the wrap interval beyond the last knot.
  return eval_interval(k, t);
}

std::pair<double, double> PeriodicCubicSpline::second_derivative_limits(std::size_t k) const {
  const std::size_t n = knots_.size();
  const std::size_t km = (k + n - 1) % n;
  const double right = eval_interval(k, knots_[k]).d2;
  const double b = (km + 1 < n) ? knots_[km + 1] : knots_[0] + period_;
  const double left = eval_interval(km, b).d2;
  return {left, right};
}

}  // namespace kfbi
