#include "kfbi/fast_solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "kfbi/error.hpp"

namespace kfbi {

namespace {

// FFTW planning is not thread-safe; plans are created once per shape and
// executed through the new-array interface, which is.
fftw_plan dst_plan(int rows, int cols) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, fftw_plan> cache;
  std::lock_guard lock(mu);
  auto& plan = cache[{rows, cols}];
  if (!plan) {
    std::vector<double> scratch(static_cast<std::size_t>(rows) * cols);
    plan = fftw_plan_r2r_2d(rows, cols, scratch.data(), scratch.data(), FFTW_RODFT00, FFTW_RODFT00,
                            FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw InternalFault("fftw: could not create DST-I plan");
  }
  return plan;
}

}  // namespace

double FastSolver::laplacian_eigenvalue(const GridContext& grid, int p, int q) {
  const double h = grid.h();
  const double sp = std::sin(p * std::numbers::pi / (2.0 * grid.I()));
  const double sq = std::sin(q * std::numbers::pi / (2.0 * grid.J()));
  return -4.0 / (h * h) * (sp * sp + sq * sq);
}

FastSolver::FastSolver(const GridContext& grid, double kappa) : grid_(grid), kappa_(kappa) {
  if (kappa < 0.0) throw ConfigError("fast_solve: kappa must be >= 0");
  const int ni = grid.I() - 1;
  const int nj = grid.J() - 1;
  const double norm = 4.0 * grid.I() * grid.J();
  inv_eigen_.resize(static_cast<std::size_t>(ni) * nj);
  for (int q = 1; q <= nj; ++q) {
    for (int p = 1; p <= ni; ++p) {
      inv_eigen_[static_cast<std::size_t>(q - 1) * ni + (p - 1)] =
          1.0 / ((laplacian_eigenvalue(grid, p, q) - kappa) * norm);
    }
  }
  plan_ = dst_plan(nj, ni);
}

GridField FastSolver::solve(const GridField& rhs) const {
  if (rhs.I != grid_.I() || rhs.J != grid_.J()) throw ConfigError("fast_solve: rhs does not match grid");
  const int ni = grid_.I() - 1;
  const int nj = grid_.J() - 1;
  std::vector<double> buf(static_cast<std::size_t>(ni) * nj);
  for (int j = 1; j <= nj; ++j) {
    for (int i = 1; i <= ni; ++i) buf[static_cast<std::size_t>(j - 1) * ni + (i - 1)] = rhs(i, j);
  }
  auto plan = static_cast<fftw_plan>(plan_);
  fftw_execute_r2r(plan, buf.data(), buf.data());
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= inv_eigen_[k];
  fftw_execute_r2r(plan, buf.data(), buf.data());
  GridField u(grid_);
  for (int j = 1; j <= nj; ++j) {
    for (int i = 1; i <= ni; ++i) u(i, j) = buf[static_cast<std::size_t>(j - 1) * ni + (i - 1)];
  }
  return u;
}

GridField fast_solve(const GridContext& grid, double kappa, const GridField& rhs) {
  return FastSolver(grid, kappa).solve(rhs);
}

}  // namespace kfbi
