#include <gtest/gtest.h>

#include <cmath>

#include "kfbi/bie.hpp"
#include "kfbi/error.hpp"
#include "support.hpp"

using namespace kfbi;

namespace {

ProblemSpec ellipse_problem(const std::string& solution, int n) {
  auto doc = KeyValueDoc::parse(
      "kind = ellipse\ncx = 0.2\ncy = 0.4\nra = 1\nrb = 0.5\nalpha = 0.44879895051282760\n"
      "box = -1.2 1.2 -1.2 1.2\nbc = dirichlet\n");
  doc.set("solution", solution);
  doc.set("grid", std::to_string(n) + " " + std::to_string(n));
  return ProblemSpec::from_doc(doc);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Bie, LaplaceIterationCountAndAccuracy) {
  const auto spec = ellipse_problem("laplace1", 128);
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  const auto r = solve_standard(solver, p, spec.richardson);
  ASSERT_TRUE(r.report.converged);
  EXPECT_GE(r.report.iterations, 22);
  EXPECT_LE(r.report.iterations, 30);
  ASSERT_TRUE(r.solution.errors.has_value());
  EXPECT_LT(r.solution.errors->linf, 1e-4);
  // Update norms decrease geometrically.
  const auto& h = r.report.history;
  EXPECT_LT(h.back(), 1e-8 * max_abs(r.density.values()) * 2);
  EXPECT_LT(h[h.size() - 1], h[h.size() / 2]);
}

TEST(Bie, ConvergedDensityIsAFixedPoint) {
  const auto spec = ellipse_problem("laplace1", 128);
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  auto opt = spec.richardson;
  opt.tol = 1e-10;
  const auto [phi, rep] = solver.richardson_solve(p, solver.initial_guess(p), opt);
  ASSERT_TRUE(rep.converged);
  const auto Aphi = solver.apply(BcKind::Dirichlet, phi);
  double res = 0.0;
  for (int m = 0; m < solver.M(); ++m) res = std::max(res, std::abs(Aphi[m] - p.modified[m]));
  EXPECT_LE(res, 1e-8 * max_abs(p.modified.values()));
}

TEST(Bie, DoubleLayerIsLinear) {
  const auto spec = ellipse_problem("laplace1", 96);
  const auto solver = KfbiSolver::from_problem(spec);
  std::vector<double> a(solver.M()), b(solver.M());
  for (int m = 0; m < solver.M(); ++m) {
    a[m] = std::sin(0.3 * m) + 0.1;
    b[m] = 2 * a[m];
  }
  const auto ta = solver.double_layer(solver.boundary_function(a));
  const auto tb = solver.double_layer(solver.boundary_function(b));
  for (int m = 0; m < solver.M(); ++m) EXPECT_NEAR(tb.value[m], 2 * ta.value[m], 1e-10 * max_abs(tb.value));
}

TEST(Bie, ConstantDensityJumpRelation) {
  // For phi = 1 the interior double layer equals the constant inside
  // with v- = 0 outside, so W~1 = 1 at every node (kappa = 0).
  const auto spec = ellipse_problem("laplace1", 128);
  const auto solver = KfbiSolver::from_problem(spec);
  const auto t = solver.double_layer(solver.boundary_function(std::vector<double>(solver.M(), 1.0)));
  for (double v : t.value) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(Bie, GammaRobustness) {
  const auto spec = ellipse_problem("laplace3", 128);
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  std::vector<double> ref;
  for (double gamma : {0.5, 0.75, 0.9}) {
    auto opt = spec.richardson;
    opt.gamma = gamma;
    opt.tol = 1e-10;
    const auto r = solve_standard(solver, p, opt);
    ASSERT_TRUE(r.report.converged) << gamma;
    if (ref.empty()) {
      ref = r.density.values();
    } else {
      for (int m = 0; m < solver.M(); ++m) EXPECT_NEAR(r.density[m], ref[m], 1e-7 * max_abs(ref));
    }
  }
  auto opt = spec.richardson;
  opt.max_iter = 3;
  EXPECT_FALSE(solve_standard(solver, p, opt).report.converged);
}

TEST(Bie, DirichletAndNeumannAgreeForModifiedHelmholtz) {
  auto d = ellipse_problem("mh2", 128);
  d.op = "modified-helmholtz";
  d.kappa = 1.0;
  auto n = d;
  n.bc = BcKind::Neumann;
  const auto sd = KfbiSolver::from_problem(d);
  const auto sn = KfbiSolver::from_problem(n);
  const auto rd = solve_standard(sd, sd.prepare(d.data(sd.nodes())), d.richardson);
  const auto rn = solve_standard(sn, sn.prepare(n.data(sn.nodes())), n.richardson);
  ASSERT_TRUE(rd.report.converged);
  ASSERT_TRUE(rn.report.converged);
  const double bound = rd.solution.errors->linf + rn.solution.errors->linf;
  double diff = 0.0;
  for (std::size_t k = 0; k < rd.solution.u.data.size(); ++k)
    if (rd.solution.valid[k]) diff = std::max(diff, std::abs(rd.solution.u.data[k] - rn.solution.u.data[k]));
  EXPECT_LE(diff, bound * 1.0000001);
  EXPECT_LT(rn.solution.errors->linf, 5e-3);
}

TEST(Bie, SecondOrderUnderRefinement) {
  const auto rows = convergence_study(ellipse_problem("laplace1", 128), {128, 256}, false);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GT(rows[1].order, 1.6);
  EXPECT_TRUE(rows[0].converged && rows[1].converged);
}

TEST(ProblemSpec, TextRoundTripAndValidation) {
  const auto spec = ProblemSpec::load(test::repo_data("problems/laplace1.kfbi"));
  EXPECT_EQ(spec.I, 256);
  EXPECT_EQ(spec.M, 256);
  const auto back = ProblemSpec::from_doc(KeyValueDoc::parse(spec.to_doc().to_string()));
  EXPECT_EQ(back.to_doc().to_string(), spec.to_doc().to_string());

  EXPECT_THROW(ProblemSpec::from_doc(KeyValueDoc::parse("kind = ellipse\nsolutoin = laplace1\n")), ConfigError);
  EXPECT_THROW(ProblemSpec::from_doc(KeyValueDoc::parse("kind = ellipse\n")), ConfigError);
  EXPECT_THROW(ProblemSpec::from_doc(KeyValueDoc::parse("kind = ellipse\nsolution = laplace1\nbc = robin\n")),
               ConfigError);
  EXPECT_THROW(ProblemSpec::load(test::repo_data("problems/does_not_exist.kfbi")), MissingArtifact);
}

TEST(ProblemSpec, RawBoundaryValues) {
  // A constant g_D = 1 gives u = 1 for the Laplace problem.
  std::string text = "kind = ellipse\nra = 1\nrb = 1\ngrid = 64 64\nM = 32\nboundary_values =";
  for (int m = 0; m < 32; ++m) text += " 1";
  const auto spec = ProblemSpec::from_doc(KeyValueDoc::parse(text + "\n"));
  const auto solver = KfbiSolver::from_problem(spec);
  const auto r = solve_standard(solver, solver.prepare(spec.data(solver.nodes())), spec.richardson);
  double dev = 0.0;
  for (std::size_t k = 0; k < r.solution.u.data.size(); ++k)
    if (r.solution.valid[k]) dev = std::max(dev, std::abs(r.solution.u.data[k] - 1.0));
  EXPECT_LT(dev, 1e-8);
}
