#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kfbi/interface_solver.hpp"

using namespace kfbi;

namespace {

// v+ = a |x - c|² + b inside the circle |x - c| = r, v- = 0 outside. The
// jumps Phi = a r² + b and Psi = 2 a r are constant, so the spline
// interpolation of the density is exact.
struct RadialCase {
  Vec2 c;
  double r, a, b, kappa;

  double inner(const Vec2& p) const { return a * dot(p - c, p - c) + b; }
  InterfaceSpec spec(const BoundaryNodeSet& nodes) const {
    InterfaceSpec s;
    s.kappa = kappa;
    s.phi = BoundaryFunction(std::vector<double>(nodes.M, a * r * r + b), nodes.length);
    s.psi = BoundaryFunction(std::vector<double>(nodes.M, 2 * a * r), nodes.length);
    s.F = SourceTerm::analytic([*this](const Vec2& p) { return 4 * a - kappa * inner(p); });
    return s;
  }
};

double nodal_error(const InterfaceSolver& s, const GridField& v, const std::function<double(const Vec2&)>& inner) {
  const auto& g = s.grid();
  double e = 0.0;
  for (int j = 0; j <= g.J(); ++j)
    for (int i = 0; i <= g.I(); ++i) {
      const double ex = s.classification().is_interior(i, j) ? inner(g.node(i, j)) : 0.0;
      e = std::max(e, std::abs(v(i, j) - ex));
    }
  return e;
}

}  // namespace

TEST(InterfaceSolver, UnitCircleQuadraticIsExact) {
  const RadialCase rc{{0, 0}, 1.0, 1.0, 0.0, 0.0};
  auto c = BoundaryCurve::build(CurveDescriptor::ellipse(0, 0, 1, 1, 0));
  const auto nodes = sample_quasi_uniform(c, 64);
  InterfaceSolver s(c, GridContext::square(-1.2, 1.2, 64), nodes, 0.0);
  const auto sol = s.solve(rc.spec(nodes), true);
  EXPECT_LE(nodal_error(s, sol.field, [&](const Vec2& p) { return rc.inner(p); }), 1e-9);
  for (int m = 0; m < nodes.M; ++m) {
    EXPECT_NEAR(sol.trace.value[m], 1.0, 1e-8);
    EXPECT_NEAR(sol.trace.normal_derivative[m], 2.0, 1e-8);
  }
}

TEST(InterfaceSolver, RadialQuadraticsAreExact) {
  const std::vector<RadialCase> cases = {
      {{0.1, -0.2}, 0.8, 1.0, 0.5, 0.0},
      {{-0.15, 0.05}, 0.7, -2.0, 1.0, 2.0},
      {{0.0, 0.1}, 0.9, 0.5, -0.3, 10.0},
  };
  for (const auto& rc : cases) {
    auto c = BoundaryCurve::build(CurveDescriptor::ellipse(rc.c.x, rc.c.y, rc.r, rc.r, 0.4));
    const auto nodes = sample_quasi_uniform(c, 80);
    InterfaceSolver s(c, GridContext::square(-1.2, 1.2, 64), nodes, rc.kappa);
    const auto sol = s.solve(rc.spec(nodes), true);
    EXPECT_LE(nodal_error(s, sol.field, [&](const Vec2& p) { return rc.inner(p); }), 1e-9) << "kappa " << rc.kappa;
    for (int m = 0; m < nodes.M; ++m) {
      EXPECT_NEAR(sol.trace.value[m], rc.a * rc.r * rc.r + rc.b, 1e-8);
      EXPECT_NEAR(sol.trace.normal_derivative[m], 2 * rc.a * rc.r, 1e-8);
    }
  }
}

TEST(InterfaceSolver, TraceOfGlobalQuadraticIsExact) {
  auto c = BoundaryCurve::build(CurveDescriptor::ellipse(0.2, 0.4, 1.0, 0.5, 0.448798950512827));
  const auto nodes = sample_quasi_uniform(c, 128);
  InterfaceSolver s(c, GridContext::square(-1.2, 1.2, 128), nodes, 0.0);
  auto q = [](const Vec2& p) { return 0.3 - p.x + 2 * p.y + 1.5 * p.x * p.x - 0.7 * p.x * p.y + 0.2 * p.y * p.y; };
  const auto& g = s.grid();
  GridField f(g);
  for (int j = 0; j <= g.J(); ++j)
    for (int i = 0; i <= g.I(); ++i) f(i, j) = q(g.node(i, j));
  InterfaceSpec spec;
  spec.phi = BoundaryFunction::zeros(nodes.M, nodes.length);
  spec.psi = BoundaryFunction::zeros(nodes.M, nodes.length);
  for (bool interior : {true, false}) {
    const auto tr = s.interpolate_trace(f, spec, true, interior);
    for (int m = 0; m < nodes.M; ++m) {
      const Vec2 p = nodes.points[m], n = nodes.normals[m];
      const Vec2 grad{-1 + 3 * p.x - 0.7 * p.y, 2 - 0.7 * p.x + 0.4 * p.y};
      EXPECT_NEAR(tr.value[m], q(p), 1e-10);
      EXPECT_NEAR(tr.normal_derivative[m], dot(grad, n), 1e-8);
    }
  }
}

TEST(InterfaceSolver, PiecewiseFieldTraceWithJumpCorrection) {
  // x² inside the unit circle, 0 outside; jumps Phi = x², Psi = 2x n_x.
  // The density splines carry an O(h_M²) error into the jumps.
  auto c = BoundaryCurve::build(CurveDescriptor::ellipse(0, 0, 1, 1, 0));
  auto at_node0 = [&](int M) {
    const auto nodes = sample_quasi_uniform(c, M);
    InterfaceSolver s(c, GridContext::square(-1.2, 1.2, 64), nodes, 0.0);
    std::vector<double> phi(M), psi(M);
    for (int m = 0; m < M; ++m) {
      phi[m] = nodes.points[m].x * nodes.points[m].x;
      psi[m] = 2 * nodes.points[m].x * nodes.normals[m].x;
    }
    InterfaceSpec spec;
    spec.phi = BoundaryFunction(phi, nodes.length);
    spec.psi = BoundaryFunction(psi, nodes.length);
    spec.F = SourceTerm::analytic([](const Vec2&) { return 2.0; });
    const auto& g = s.grid();
    GridField f(g);
    for (int j = 0; j <= g.J(); ++j)
      for (int i = 0; i <= g.I(); ++i)
        if (s.classification().is_interior(i, j)) f(i, j) = g.x(i) * g.x(i);
    const auto tr = s.interpolate_trace(f, spec, true);
    EXPECT_NEAR(nodes.points[0].x, 1.0, 1e-15);
    return std::pair{std::abs(tr.value[0] - 1.0), std::abs(tr.normal_derivative[0] - 2.0)};
  };
  const auto [v512, d512] = at_node0(512);
  const auto [v1024, d1024] = at_node0(1024);
  EXPECT_LT(v1024, 1e-8);
  EXPECT_LT(d1024, 1e-7);
  EXPECT_GT(d512 / d1024, 3.5);
  EXPECT_GT(v512 / v1024, 3.5);
}

TEST(InterfaceSolver, LinearInData) {
  auto c = BoundaryCurve::build(CurveDescriptor::star(5, 0.1));
  const auto nodes = sample_quasi_uniform(c, 96);
  InterfaceSolver s(c, GridContext::square(-1.5, 1.5, 96), nodes, 1.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_spec = [&] {
    std::vector<double> a(96), b(96);
    for (int m = 0; m < 96; ++m) {
      a[m] = u(rng);
      b[m] = u(rng);
    }
    InterfaceSpec sp;
    sp.kappa = 1.0;
    sp.phi = BoundaryFunction(a, nodes.length);
    sp.psi = BoundaryFunction(b, nodes.length);
    const double k = u(rng);
    sp.F = SourceTerm::analytic([k](const Vec2& p) { return k * p.x * p.y + 1.0; });
    return sp;
  };
  const auto s1 = random_spec(), s2 = random_spec();
  InterfaceSpec sum;
  sum.kappa = 1.0;
  std::vector<double> a(96), b(96);
  for (int m = 0; m < 96; ++m) {
    a[m] = 2 * s1.phi[m] - s2.phi[m];
    b[m] = 2 * s1.psi[m] - s2.psi[m];
  }
  sum.phi = BoundaryFunction(a, nodes.length);
  sum.psi = BoundaryFunction(b, nodes.length);
  sum.F = SourceTerm::analytic([&](const Vec2& p) { return 2 * s1.F.f(p) - s2.F.f(p); });
  const auto r1 = s.solve(s1, true), r2 = s.solve(s2, true), rs = s.solve(sum, true);
  double scale = 0.0, dev = 0.0;
  for (int m = 0; m < 96; ++m) {
    const double lin = 2 * r1.trace.value[m] - r2.trace.value[m];
    scale = std::max(scale, std::abs(lin));
    dev = std::max(dev, std::abs(rs.trace.value[m] - lin));
    dev = std::max(dev, std::abs(rs.trace.normal_derivative[m] -
                                 (2 * r1.trace.normal_derivative[m] - r2.trace.normal_derivative[m])) / 10);
  }
  EXPECT_LE(dev, 1e-10 * scale);
}

TEST(InterfaceSolver, SecondOrderForSmoothJumps) {
  // Fixed density under grid refinement; trace differences shrink at O(h²).
  auto c = BoundaryCurve::build(CurveDescriptor::ellipse(0.2, 0.4, 1.0, 0.5, 0.448798950512827));
  auto trace_at = [&](int N) {
    const auto nodes = sample_quasi_uniform(c, 64);
    InterfaceSolver s(c, GridContext::square(-1.2, 1.2, N), nodes, 0.0);
    std::vector<double> phi(64);
    for (int m = 0; m < 64; ++m) phi[m] = std::exp(nodes.points[m].x) * std::cos(nodes.points[m].y);
    InterfaceSpec sp;
    sp.phi = BoundaryFunction(phi, nodes.length);
    sp.psi = BoundaryFunction::zeros(64, nodes.length);
    return s.solve(sp).trace.value;
  };
  const auto t1 = trace_at(128), t2 = trace_at(256), t3 = trace_at(512);
  double d12 = 0.0, d23 = 0.0;
  for (int m = 0; m < 64; ++m) {
    d12 = std::max(d12, std::abs(t1[m] - t2[m]));
    d23 = std::max(d23, std::abs(t2[m] - t3[m]));
  }
  EXPECT_GT(std::log2(d12 / d23), 1.6);
}
