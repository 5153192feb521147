#pragma once

#include <filesystem>
#include <vector>

#include "kfbi/vec2.hpp"

namespace kfbi {

/// Uniform Cartesian grid over the box [x_lo, x_hi] x [y_lo, y_hi] with I x J
/// square cells; nodes (i, j), 0 <= i <= I, 0 <= j <= J.
class GridContext {
 public:
  GridContext() = default;
  GridContext(double x_lo, double x_hi, double y_lo, double y_hi, int I, int J);

  /// Square box [lo, hi]^2 with n x n cells.
  static GridContext square(double lo, double hi, int n) { return {lo, hi, lo, hi, n, n}; }

  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }
  double y_lo() const { return y_lo_; }
  double y_hi() const { return y_hi_; }
  int I() const { return I_; }
  int J() const { return J_; }
  double h() const { return h_; }

  double x(int i) const { return x_lo_ + i * h_; }
  double y(int j) const { return y_lo_ + j * h_; }
  Vec2 node(int i, int j) const { return {x(i), y(j)}; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * (I_ + 1) + i; }
  std::size_t node_count() const { return static_cast<std::size_t>(I_ + 1) * (J_ + 1); }
  bool on_ring(int i, int j) const { return i == 0 || j == 0 || i == I_ || j == J_; }

  /// Same grid with the origin moved by (dx, dy).
  GridContext shifted(double dx, double dy) const;

 private:
  double x_lo_ = 0.0, x_hi_ = 1.0, y_lo_ = 0.0, y_hi_ = 1.0;
  int I_ = 8, J_ = 8;
  double h_ = 0.125;
};

/// Nodal values, row-major by j then i: value(i, j) = data[j * (I + 1) + i].
struct GridField {
  int I = 0;
  int J = 0;
  std::vector<double> data;

  GridField() = default;
  explicit GridField(const GridContext& g) : I(g.I()), J(g.J()), data(g.node_count(), 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(j) * (I + 1) + i]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(j) * (I + 1) + i]; }
};

/// Five-point (Delta - kappa) stencil at interior nodes, zero on the ring.
GridField apply_operator(const GridContext& grid, double kappa, const GridField& field);

/// KFBIF1 dump and reader; CSV rows "i,j,x,y,value".
void write_field(const std::filesystem::path& path, const GridContext& grid, const GridField& field);
GridField read_field(const std::filesystem::path& path, GridContext* grid = nullptr);
void write_field_csv(const std::filesystem::path& path, const GridContext& grid, const GridField& field);

}  // namespace kfbi
