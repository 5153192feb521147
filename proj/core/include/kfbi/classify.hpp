#pragma once

#include <cstdint>
#include <vector>

#include "kfbi/curve.hpp"
#include "kfbi/error.hpp"
#include "kfbi/grid.hpp"

namespace kfbi {

/// Intersection of the boundary with one grid edge.
///
/// axis 0: horizontal edge (i, j)-(i+1, j); axis 1: vertical edge (i, j)-(i, j+1).
struct Crossing {
  Vec2 point;
  double t = 0.0;  // curve parameter
  double s = 0.0;  // arclength
  int axis = 0;
  int i = 0;
  int j = 0;
};

/// Thrown when the boundary is tangent to a grid line or passes through a
/// grid node; callers reclassify on a slightly shifted grid.
class TangencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct NodeClassification {
  GridContext grid;
  std::vector<std::uint8_t> interior;   // per node
  std::vector<std::uint8_t> irregular;  // per node
  std::vector<Crossing> crossings;
  std::vector<int> edge_x;  // (I) x (J+1): crossing index on edge (i,j)-(i+1,j), or -1
  std::vector<int> edge_y;  // (I+1) x J: crossing index on edge (i,j)-(i,j+1), or -1

  bool is_interior(int i, int j) const { return interior[grid.index(i, j)] != 0; }
  bool is_irregular(int i, int j) const { return irregular[grid.index(i, j)] != 0; }
  int crossing_x(int i, int j) const { return edge_x[static_cast<std::size_t>(j) * grid.I() + i]; }
  int crossing_y(int i, int j) const { return edge_y[static_cast<std::size_t>(j) * (grid.I() + 1) + i]; }
  int interior_count() const;
  int irregular_count() const;
};

/// Labels every node of `grid` and locates all grid-line crossings.
///
/// Requires the curve to stay `clearance_cells * h` away from the box
/// boundary (ConfigError otherwise). Throws TangencyError on an edge crossed
/// more than once or a crossing exactly at a node.
NodeClassification classify_nodes(const GridContext& grid, const BoundaryCurve& curve, double clearance_cells = 2.0);

/// classify_nodes with tangency resolution: on TangencyError the grid origin
/// is shifted by 1e-9 h and classification is repeated. The returned
/// classification's grid is the one actually used.
NodeClassification classify_nodes_robust(const GridContext& grid, const BoundaryCurve& curve,
                                         double clearance_cells = 2.0);

}  // namespace kfbi
