#include "kfbi/classify.hpp"

#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

namespace kfbi {

int NodeClassification::interior_count() const {
  int n = 0;
  for (auto v : interior) n += v;
  return n;
}

int NodeClassification::irregular_count() const {
  int n = 0;
  for (auto v : irregular) n += v;
  return n;
}

namespace {

// Cell index of coordinate c on a grid line of n cells; -1 when c is a node.
int edge_index(double c, double lo, double h, int n, bool& on_node) {
  const double u = (c - lo) / h;
  const double k = std::floor(u);
  on_node = (u == k);
  if (k < 0 || k >= n) return -1;
  return static_cast<int>(k);
}

}  // namespace

NodeClassification classify_nodes(const GridContext& grid, const BoundaryCurve& curve, double clearance_cells) {
  const double h = grid.h();
  const int I = grid.I();
  const int J = grid.J();
  const auto b = curve.bounds();
  const double gap = clearance_cells * h;
  if (b[0] - grid.x_lo() < gap || grid.x_hi() - b[1] < gap || b[2] - grid.y_lo() < gap ||
      grid.y_hi() - b[3] < gap) {
    std::ostringstream ss;
    ss << "classify: boundary bounds [" << b[0] << ", " << b[1] << "] x [" << b[2] << ", " << b[3]
       << "] come within " << clearance_cells << " cells of the box";
    throw ConfigError(ss.str());
  }

  NodeClassification nc;
  nc.grid = grid;
  nc.interior.assign(grid.node_count(), 0);
  nc.irregular.assign(grid.node_count(), 0);
  nc.edge_x.assign(static_cast<std::size_t>(I) * (J + 1), -1);
  nc.edge_y.assign(static_cast<std::size_t>(I + 1) * J, -1);

  auto add = [&](int axis, double t, int line) {
    const auto d = curve.at_parameter(t);
    bool on_node = false;
    int k;
    if (axis == 0) {
      k = edge_index(d.pos.x, grid.x_lo(), h, I, on_node);
    } else {
      k = edge_index(d.pos.y, grid.y_lo(), h, J, on_node);
    }
    if (k < 0) throw InternalFault("classify: crossing outside the box");
    if (on_node) throw TangencyError("classify: boundary passes through a grid node");
    int& slot = axis == 0 ? nc.edge_x[static_cast<std::size_t>(line) * I + k]
                          : nc.edge_y[static_cast<std::size_t>(k) * (I + 1) + line];
    if (slot >= 0) throw TangencyError("classify: grid edge crossed more than once");
    Crossing c;
    c.point = d.pos;
    c.t = t;
    c.s = curve.arclength_at(t);
    c.axis = axis;
    c.i = axis == 0 ? k : line;
    c.j = axis == 0 ? line : k;
    slot = static_cast<int>(nc.crossings.size());
    nc.crossings.push_back(c);
  };

  // Horizontal lines y = y_j: the crossings determine the labels by parity.
  for (int j = 0; j <= J; ++j) {
    for (double t : curve.level_crossings(1, grid.y(j))) add(0, t, j);
    bool in = false;
    for (int i = 0; i <= I; ++i) {
      if (i > 0 && nc.crossing_x(i - 1, j) >= 0) in = !in;
      nc.interior[grid.index(i, j)] = in ? 1 : 0;
    }
    if (in) throw TangencyError("classify: odd crossing count on a grid row");
  }
  // Vertical lines x = x_i: locate crossings and cross-check labels.
  for (int i = 0; i <= I; ++i) {
    for (double t : curve.level_crossings(0, grid.x(i))) add(1, t, i);
    for (int j = 0; j < J; ++j) {
      const bool differ = nc.is_interior(i, j) != nc.is_interior(i, j + 1);
      if (differ != (nc.crossing_y(i, j) >= 0)) {
        throw TangencyError("classify: row and column crossings disagree");
      }
    }
  }
  for (const auto& c : nc.crossings) {
    nc.irregular[grid.index(c.i, c.j)] = 1;
    if (c.axis == 0) {
      nc.irregular[grid.index(c.i + 1, c.j)] = 1;
    } else {
      nc.irregular[grid.index(c.i, c.j + 1)] = 1;
    }
  }
  if (nc.interior_count() == 0) throw ConfigError("classify: no interior grid nodes");
  return nc;
}

NodeClassification classify_nodes_robust(const GridContext& grid, const BoundaryCurve& curve,
                                         double clearance_cells) {
  GridContext g = grid;
  for (int attempt = 0;; ++attempt) {
    try {
      return classify_nodes(g, curve, clearance_cells);
    } catch (const TangencyError& e) {
      if (attempt >= 8) throw;
      spdlog::debug("{}; shifting grid origin", e.what());
      g = g.shifted(1e-9 * grid.h(), 1e-9 * grid.h());
    }
  }
}

}  // namespace kfbi
