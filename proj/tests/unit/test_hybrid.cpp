#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "kfbi/datagen.hpp"
#include "kfbi/error.hpp"
#include "kfbi/hybrid.hpp"
#include "support.hpp"

using namespace kfbi;

namespace {

const char* kSmallProblem =
    "operator = laplace\nkind = ellipse\nra = 0.8\nrb = 0.6\nalpha = 0.3\nbox = -1.2 1.2 -1.2 1.2\n"
    "grid = 64 64\nM = 32\n";

ProblemSpec small_problem(const std::string& solution) {
  return ProblemSpec::from_doc(KeyValueDoc::parse(std::string(kSmallProblem) + "solution = " + solution + "\n"));
}

// Dense matrix of the Dirichlet boundary operator, column by column.
Matrix operator_matrix(const KfbiSolver& solver) {
  const int M = solver.M();
  Matrix A(M, M);
  for (int k = 0; k < M; ++k) {
    std::vector<double> e(M, 0.0);
    e[k] = 1.0;
    const auto col = solver.apply(BcKind::Dirichlet, solver.boundary_function(e));
    for (int m = 0; m < M; ++m) A(m, k) = col[m];
  }
  return A;
}

OperatorModel inverse_model(const KfbiSolver& solver) {
  LinearOperatorModel lm;
  lm.M = solver.M();
  lm.W = operator_matrix(solver).partialPivLu().inverse();
  return OperatorModel(lm);
}

OperatorModel zero_model(int M) {
  LinearOperatorModel lm;
  lm.M = M;
  lm.W = Matrix::Zero(M, M);
  return OperatorModel(lm);
}

double max_abs_diff(const BoundaryFunction& a, const BoundaryFunction& b) {
  double d = 0.0;
  for (int m = 0; m < a.size(); ++m) d = std::max(d, std::abs(a[m] - b[m]));
  return d;
}

double max_abs(const BoundaryFunction& a) {
  double d = 0.0;
  for (double v : a.values()) d = std::max(d, std::abs(v));
  return d;
}

}  // namespace

TEST(Hybrid, ExactInverseModel) {
  const auto spec = small_problem("laplace1");
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  const auto model = inverse_model(solver);
  const auto std_run = solve_standard(solver, p, spec.richardson);
  ASSERT_TRUE(std_run.report.converged);

  const auto s1 = strategy1(solver, p, model);
  EXPECT_TRUE(s1.report.history.empty());
  EXPECT_EQ(s1.report.iterations, 0);
  ASSERT_TRUE(s1.solution.errors && std_run.solution.errors);
  EXPECT_NEAR(s1.solution.errors->linf, std_run.solution.errors->linf, 0.01 * std_run.solution.errors->linf);

  const auto s2 = strategy2(solver, p, model, {}, spec.richardson);
  EXPECT_TRUE(s2.report.converged);
  EXPECT_LE(s2.report.iterations, 3);
  EXPECT_LE(max_abs_diff(s2.density, std_run.density), 10 * spec.richardson.tol * max_abs(std_run.density));
}

TEST(Hybrid, ZeroModelMatchesZeroStart) {
  const auto spec = small_problem("laplace3");
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  const auto zero_start = solve_standard(solver, p, spec.richardson, "zero");
  const auto s2 = strategy2(solver, p, zero_model(solver.M()), {}, spec.richardson);
  EXPECT_NEAR(s2.report.iterations, zero_start.report.iterations, 1);
  EXPECT_LE(max_abs_diff(s2.density, zero_start.density), 1e-12 * max_abs(zero_start.density));
}

TEST(Hybrid, StrategyTwoConvergesToStandardDensity) {
  const auto spec = small_problem("laplace1");
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  const auto std_run = solve_standard(solver, p, spec.richardson);
  // A deliberately poor model: half the identity.
  LinearOperatorModel lm = LinearOperatorModel::identity(solver.M());
  lm.W *= 0.5;
  const auto s2 = strategy2(solver, p, OperatorModel(lm), {}, spec.richardson);
  ASSERT_TRUE(s2.report.converged);
  EXPECT_LE(max_abs_diff(s2.density, std_run.density), 10 * spec.richardson.tol * max_abs(std_run.density));
}

TEST(Hybrid, TrainedModelsAndRidgeStrength) {
  auto cfg = DatagenConfig::from_doc(KeyValueDoc::parse(
      std::string(kSmallProblem) +
      "records = 96\nfamilies = harmonic pole pole\nterms = 1 3\npole_order = 1 3\npole_distance = 0.05 1.0\n"
      "seed = 5\n"));
  const auto ds = generate_dataset(cfg);
  ASSERT_GE(ds.records.size(), 64u);
  Matrix G(ds.records.size(), ds.M), T(ds.records.size(), ds.M);
  for (std::size_t k = 0; k < ds.records.size(); ++k)
    for (int m = 0; m < ds.M; ++m) {
      G(static_cast<Eigen::Index>(k), m) = ds.records[k].g[m];
      T(static_cast<Eigen::Index>(k), m) = ds.records[k].phi[m];
    }

  const auto spec = small_problem("laplace1");
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  const auto std_run = solve_standard(solver, p, spec.richardson);

  std::vector<int> iterations;
  std::vector<double> s1_errors;
  for (double ridge : {0.0, 1.0, 100.0}) {
    FitOptions opt;
    opt.ridge = ridge;
    const OperatorModel model(fit_linear(G, T, opt));
    const auto s1 = strategy1(solver, p, model);
    const auto s2 = strategy2(solver, p, model, {}, spec.richardson);
    ASSERT_TRUE(s2.report.converged);
    // The model cannot be more accurate than the discretization it learned.
    EXPECT_GE(s1.solution.errors->linf, 0.5 * std_run.solution.errors->linf);
    iterations.push_back(s2.report.iterations);
    s1_errors.push_back(s1.solution.errors->linf);
  }
  EXPECT_LE(iterations[0], iterations[1]);
  EXPECT_LE(iterations[1], iterations[2]);
  EXPECT_LT(iterations[0], std_run.report.iterations);
  EXPECT_LE(s1_errors[0], s1_errors[1]);
  EXPECT_LE(s1_errors[1], s1_errors[2]);
}

TEST(Hybrid, ShapeMismatchRejected) {
  const auto spec = small_problem("laplace1");
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  EXPECT_THROW(strategy1(solver, p, OperatorModel(LinearOperatorModel::identity(16))), ConfigError);
  EXPECT_THROW(strategy1(solver, p, OperatorModel(LinearOperatorModel::identity(32)), {1.0}), ConfigError);
}

TEST(Benchmark, EmptySuiteGivesEmptyReport) {
  const auto suite = BenchmarkSuite::from_doc(KeyValueDoc::parse("methods = standard strategy1\n"));
  EXPECT_TRUE(run_benchmark(suite).rows.empty());
}

TEST(Benchmark, OracleSuiteRowsAndCsv) {
  test::TempDir dir("bench");
  {
    std::ofstream(dir / "p.kfbi") << kSmallProblem << "solution = laplace1\n";
    std::ofstream(dir / "s.suite") << "problem = p.kfbi\nmethods = standard strategy1 strategy2\nmodel = oracle\n"
                                      "repeats = 1\n";
  }
  const auto report = run_benchmark(BenchmarkSuite::load(dir / "s.suite"));
  ASSERT_EQ(report.rows.size(), 3u);
  const auto& st = report.rows[0];
  const auto& s1 = report.rows[1];
  const auto& s2 = report.rows[2];
  EXPECT_EQ(st.method, "standard");
  EXPECT_EQ(st.grid, 64);
  EXPECT_EQ(st.status, "ok");
  EXPECT_EQ(s1.linf, st.linf);
  EXPECT_LE(s2.iterations, 1);
  EXPECT_GT(st.iterations, 10);

  report.write_csv(dir / "out.csv");
  std::ifstream in(dir / "out.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, BenchmarkReport::csv_header());
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST(Benchmark, MissingModelMarksRowsFailed) {
  test::TempDir dir("bench");
  {
    std::ofstream(dir / "p.kfbi") << kSmallProblem << "solution = laplace1\n";
    std::ofstream(dir / "s.suite") << "problem = p.kfbi\nmethods = standard strategy2\nmodel = nope.kfbiw\n"
                                      "repeats = 1\n";
  }
  const auto report = run_benchmark(BenchmarkSuite::load(dir / "s.suite"));
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].status, "ok");
  EXPECT_EQ(report.rows[1].status, "failed");
  EXPECT_FALSE(report.rows[1].message.empty());
}

TEST(Benchmark, SuiteValidation) {
  EXPECT_THROW(BenchmarkSuite::from_doc(KeyValueDoc::parse("methods = standard fancy\n")), ConfigError);
  EXPECT_THROW(BenchmarkSuite::from_doc(KeyValueDoc::parse("grids = 4\n")), ConfigError);
  EXPECT_THROW(BenchmarkSuite::from_doc(KeyValueDoc::parse("colour = red\n")), ConfigError);
  const auto s = BenchmarkSuite::from_doc(KeyValueDoc::parse("model = a.kfbiw\nmodel_256 = b.kfbiw\n"), "/x");
  EXPECT_EQ(s.model_for(128), "/x/a.kfbiw");
  EXPECT_EQ(s.model_for(256), "/x/b.kfbiw");
}
