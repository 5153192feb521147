#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kfbi/bie.hpp"
#include "kfbi/keyvalue.hpp"
#include "kfbi/operator_model.hpp"

namespace kfbi {

struct StrategyResult {
  SolutionField solution;
  BoundaryFunction density;
  IterationReport report;          // empty for Strategy 1
  double inference_seconds = 0.0;
};

/// Predicted density from the model; throws ConfigError on an M mismatch.
BoundaryFunction predict_density(const KfbiSolver& solver, const PreparedProblem& p, const OperatorModel& model,
                                 const std::vector<double>& params);

/// Strategy 1: the prediction is the density; no iteration.
StrategyResult strategy1(const KfbiSolver& solver, const PreparedProblem& p, const OperatorModel& model,
                         const std::vector<double>& params = {});

/// Strategy 2: the prediction starts the Richardson iteration.
StrategyResult strategy2(const KfbiSolver& solver, const PreparedProblem& p, const OperatorModel& model,
                         const std::vector<double>& params, const RichardsonOptions& opt);

/// Benchmark suite (key = value):
///
///     problem = problems/laplace1.kfbi     # repeated; paths relative to the suite
///     grids = 128 256                      # default: the problem's own grid
///     methods = standard strategy1 strategy2
///     model = oracle | zero | path.kfbiw   # default for every grid
///     model_<N> = path.kfbiw               # override for grid N
///     params = 3 0.2                       # parameter input for param models
///     repeats = 3
struct BenchmarkSuite {
  std::vector<std::filesystem::path> problems;
  std::vector<int> grids;
  std::vector<std::string> methods{"standard"};
  std::string model = "none";
  std::vector<std::pair<int, std::string>> grid_models;
  std::vector<double> params;
  int repeats = 3;

  static BenchmarkSuite from_doc(const KeyValueDoc& doc, const std::filesystem::path& base_dir = {});
  static BenchmarkSuite load(const std::filesystem::path& path);
  std::string model_for(int grid) const;
};

/// One CSV row per (problem, grid, method).
struct BenchmarkRow {
  std::string problem;
  int grid = 0;
  std::string method;
  std::string status = "ok";        // ok | failed
  double linf = 0.0;
  double l2 = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;        // median over repeats
  double time_saved = 0.0;          // 1 - t / t_standard
  double inference_seconds = 0.0;
  double inference_iterations = 0.0;  // inference time / mean standard iteration time
  std::string message;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  void write_csv(const std::filesystem::path& path) const;
  static std::string csv_header();
};

/// Rows in suite order. threads > 1 runs problems concurrently (error columns
/// only are meaningful then).
BenchmarkReport run_benchmark(const BenchmarkSuite& suite, int threads = 1);

}  // namespace kfbi
