#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kfbi/bie.hpp"
#include "kfbi/catalog.hpp"
#include "kfbi/keyvalue.hpp"

namespace kfbi {

/// One training pair (g~, phi) with its parameter vector and provenance
/// (catalog terms + grid).
struct DatasetRecord {
  std::vector<double> params;
  std::vector<double> g;
  std::vector<double> phi;
  std::string provenance;
};

/// KFBID1 file contents (see docs/formats.md).
struct Dataset {
  int M = 0;
  std::vector<std::string> param_names;
  KeyValueDoc info;   // free-form header entries (operator, curve, grid, ...)
  std::vector<DatasetRecord> records;

  int P() const { return static_cast<int>(param_names.size()); }
};

void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);
/// columns: record, kind (param|g|phi), index, value
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);

/// Seeded shuffle, first round(fraction * n) records to the training part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction, std::uint64_t seed);

/// One sampled problem parameter. Names: kappa, ra, rb, alpha, sm, sc, rotate,
/// scale, cx, cy, or perturb.<index>.x / perturb.<index>.y.
///
///     param = sc uniform 0.05 0.2
///     param = sm int 3 6
///     param = sc grid 0.05 0.2 8      # point k takes value k mod 8
struct ParamAxis {
  std::string name;
  std::string sampling;   // uniform | int | grid
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;          // grid only
};

/// Dataset generation config (key = value). Problem keys (operator, kappa,
/// curve, box, grid, M, gamma, tol, ...) as in a problem file, plus:
///
///     records = 3000               # total records attempted
///     param = <axis>               # repeated; none for a fixed domain
///     param_points = 20            # parameter draws (ignored without axes)
///     families = harmonic pole     # harmonic | pole | smooth
///     terms = 1 3                  # terms per solution (min max)
///     coef_range = -1 1
///     freq_range = 0.2 2
///     max_degree = 12              # harmonic polynomials
///     pole_order = 1 2
///     pole_distance = 0.3 1.5      # from the boundary, outward
///     screen_factor = 10
///     expected_error = 0.02        # c in  c h^2 (|Du| + |D^2 u| + |D^3 u|)
///     seed = 1
struct DatagenConfig {
  ProblemSpec base;
  int records = 100;
  std::vector<ParamAxis> axes;
  int param_points = 1;
  std::vector<std::string> families{"harmonic"};
  int min_terms = 1;
  int max_terms = 3;
  std::array<double, 2> coef_range{-1.0, 1.0};
  std::array<double, 2> freq_range{0.2, 2.0};
  int max_degree = 12;
  std::array<int, 2> pole_order{1, 2};
  std::array<double, 2> pole_distance{0.3, 1.5};
  double screen_factor = 10.0;
  double expected_error = 0.02;
  std::uint64_t seed = 1;

  static DatagenConfig from_doc(const KeyValueDoc& doc);
  static DatagenConfig load(const std::filesystem::path& path);
  KeyValueDoc to_doc() const;

  /// Problem spec for parameter point `values` (one per axis).
  ProblemSpec spec_at(const std::vector<double>& values) const;
};

/// Per-record generation statistics.
struct RecordOutcome {
  int point = 0;
  int iterations = 0;
  bool converged = false;
  bool accepted = false;
  double error = 0.0;      // L-inf vs the manufactured solution
  double expected = 0.0;   // a priori discretization error estimate
  std::string reason;
  std::string solution;
};

struct GenerationLog {
  std::vector<RecordOutcome> outcomes;
  int accepted() const;
  int rejected() const;
  int nonconverged() const;
  void write(const std::filesystem::path& path) const;
};

/// A priori error model c h^2 (|Du| + |D^2 u| + |D^3 u|), each a max over the
/// boundary nodes; third derivatives by central differences of the Hessian.
double expected_discretization_error(const ManufacturedSolution& u, const BoundaryNodeSet& nodes, double h,
                                     double c);

/// Draws a random catalog solution for the given nodes (terms normalized to
/// unit max on the boundary, then scaled by a coefficient from coef_range).
ManufacturedSolution draw_solution(const DatagenConfig& cfg, const KfbiSolver& solver, std::mt19937_64& rng);

/// Runs the standard KFBI solve for `u` and returns the record, or nothing if
/// the solve did not converge or failed the error screen.
std::optional<DatasetRecord> generate_record(const KfbiSolver& solver, const ProblemSpec& spec,
                                             const ManufacturedSolution& u, const std::vector<double>& params,
                                             double screen_factor, double expected_error_coef,
                                             RecordOutcome* outcome = nullptr);

/// Deterministic for a fixed config (independent of `threads`).
Dataset generate_dataset(const DatagenConfig& cfg, GenerationLog* log = nullptr, int threads = 1);

}  // namespace kfbi
