// Microbenchmarks: fast solve, one interface solve, one standard KFBI solve,
// and operator-model inference. Grid size is the benchmark argument.

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kfbi/bie.hpp"
#include "kfbi/catalog.hpp"
#include "kfbi/boundary.hpp"
#include "kfbi/curve.hpp"
#include "kfbi/fast_solver.hpp"
#include "kfbi/grid.hpp"
#include "kfbi/interface_solver.hpp"
#include "kfbi/operator_model.hpp"

using namespace kfbi;

namespace {

GridField random_field(const GridContext& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridField f(g);
  for (auto& v : f.data) v = u(rng);
  return f;
}

ProblemSpec laplace_ellipse(int n) {
  ProblemSpec s;
  s.curve = CurveDescriptor::ellipse(0.2, 0.4, 1.0, 0.5, 0.44879895051282760);
  s.I = s.J = s.M = n;
  s.solution = ManufacturedSolution::parse("laplace1");
  return s;
}

}  // namespace

static void BM_FastSolve(benchmark::State& state) {
  const auto g = GridContext::square(-1.2, 1.2, static_cast<int>(state.range(0)));
  const FastSolver solver(g, 0.0);
  const auto rhs = random_field(g, 1);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(rhs));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FastSolve)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMicrosecond);

static void BM_InterfaceSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto curve = BoundaryCurve::build(CurveDescriptor::ellipse(0.2, 0.4, 1.0, 0.5, 0.44879895051282760));
  const auto nodes = sample_quasi_uniform(curve, n);
  const InterfaceSolver solver(curve, GridContext::square(-1.2, 1.2, n), nodes, 0.0);
  InterfaceSpec spec;
  std::vector<double> phi(nodes.M);
  for (int m = 0; m < nodes.M; ++m) phi[m] = std::cos(2.0 * std::numbers::pi * nodes.arclength[m] / nodes.length);
  spec.phi = BoundaryFunction(phi, nodes.length);
  spec.psi = BoundaryFunction::zeros(nodes.M, nodes.length);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(spec, false));
}
BENCHMARK(BM_InterfaceSolve)->RangeMultiplier(2)->Range(128, 512)->Unit(benchmark::kMicrosecond);

static void BM_StandardSolve(benchmark::State& state) {
  const auto spec = laplace_ellipse(static_cast<int>(state.range(0)));
  const auto solver = KfbiSolver::from_problem(spec);
  const auto p = solver.prepare(spec.data(solver.nodes()));
  int iterations = 0;
  for (auto _ : state) {
    const auto r = solve_standard(solver, p, spec.richardson);
    iterations = r.report.iterations;
  }
  state.counters["iterations"] = iterations;
}
BENCHMARK(BM_StandardSolve)->RangeMultiplier(2)->Range(128, 512)->Unit(benchmark::kMillisecond);

static void BM_LinearInference(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const OperatorModel model(LinearOperatorModel::identity(M));
  std::vector<double> g(M, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer({}, g));
}
BENCHMARK(BM_LinearInference)->RangeMultiplier(2)->Range(128, 1024);

BENCHMARK_MAIN();
