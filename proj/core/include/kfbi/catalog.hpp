#pragma once

#include <string>
#include <vector>

#include "kfbi/vec2.hpp"

namespace kfbi {

/// Value, gradient and Hessian of a scalar function at a point.
struct Jet {
  double u = 0.0;
  double ux = 0.0;
  double uy = 0.0;
  double uxx = 0.0;
  double uxy = 0.0;
  double uyy = 0.0;

  Jet& operator+=(const Jet& o);
  Jet operator*(double c) const;
  double laplacian() const { return uxx + uyy; }
};

/// One closed-form term of a manufactured solution, scaled by `coef`.
///
///     exp_cos  c a          c e^{ax} cos(ay)
///     exp_sin  c a          c e^{ay} sin(ax)
///     sin_sinh c a          c sin(ax) sinh(ay)
///     cosh_cos c a          c cosh(ax) cos(ay)
///     wave     c a th ph    c Re exp(a e^{-i th} z + i ph)          (harmonic)
///     hpoly    c k th x0 y0 sc   c Re(e^{-i th} ((z - z0)/sc)^k)    (harmonic)
///     pole     c k th x0 y0 sc   c Re(e^{-i th} (sc/(z - z0))^k)     (harmonic off z0)
///     exp_lin  c a b        c e^{ax + by}
///     sin_cos  c a b        c sin(ax) cos(by)
///     poly     c p q        c x^p y^q
///     const    c
struct SolutionTerm {
  std::string kind;
  double coef = 1.0;
  std::vector<double> params;

  Jet jet(const Vec2& p) const;
  bool harmonic() const;
};

/// Sum of catalog terms: u, f = (Delta - kappa) u and boundary data.
///
/// Text form: terms separated by '|', e.g. "exp_cos 1 1 | exp_sin 1 1", or a
/// preset name (see presets()).
class ManufacturedSolution {
 public:
  ManufacturedSolution() = default;
  explicit ManufacturedSolution(std::vector<SolutionTerm> terms) : terms_(std::move(terms)) {}

  static ManufacturedSolution parse(const std::string& text);
  static const std::vector<std::string>& presets();

  Jet jet(const Vec2& p) const;
  double value(const Vec2& p) const { return jet(p).u; }
  double source(const Vec2& p, double kappa) const;
  double normal_derivative(const Vec2& p, const Vec2& n) const;
  bool harmonic() const;
  bool empty() const { return terms_.empty(); }

  const std::vector<SolutionTerm>& terms() const { return terms_; }
  /// Canonical text, parseable by parse().
  std::string to_string() const;

  ManufacturedSolution operator+(const ManufacturedSolution& o) const;
  ManufacturedSolution scaled(double c) const;

 private:
  std::vector<SolutionTerm> terms_;
};

}  // namespace kfbi
