#pragma once

#include <vector>

#include "kfbi/grid.hpp"

namespace kfbi {

/// Direct solver for the five-point (Delta - kappa) system with a zero
/// Dirichlet ring, diagonalized by a 2D DST-I over the interior nodes.
///
/// Immutable after construction; solve() may be called concurrently.
class FastSolver {
 public:
  FastSolver(const GridContext& grid, double kappa);

  /// Returns u with apply_operator(u) = rhs at interior nodes, u = 0 on the
  /// ring. rhs values on the ring are ignored.
  GridField solve(const GridField& rhs) const;

  const GridContext& grid() const { return grid_; }
  double kappa() const { return kappa_; }

  /// Discrete eigenvalue of Delta_h for mode (p, q), without the -kappa shift.
  static double laplacian_eigenvalue(const GridContext& grid, int p, int q);

 private:
  GridContext grid_;
  double kappa_;
  std::vector<double> inv_eigen_;  // scaled by the DST normalization
  void* plan_ = nullptr;           // fftw_plan, owned by a global cache
};

GridField fast_solve(const GridContext& grid, double kappa, const GridField& rhs);

}  // namespace kfbi
