#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "topoforge/grid.hpp"

namespace topoforge {

/// Normalized position, origin at the lower-left corner of the design domain.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Nearest grid node (column i, level j from the bottom) to a normalized
/// position. Ties break toward the nearer domain border.
std::pair<int, int> nearest_node(const GridSize& grid, Point2 p);

/// Normalized coordinates of a node.
Point2 node_position(const GridSize& grid, int i, int j);

/// Element (row, col) containing a normalized point; points on a shared
/// border go to the lower-left element.
std::pair<int, int> containing_element(const GridSize& grid, Point2 p);

/// Bilinear distribution of a point onto the four corner nodes of its element.
struct NodalStencil {
  std::array<std::size_t, 4> nodes{};
  std::array<double, 4> weights{};
};

NodalStencil load_stencil(const GridSize& grid, Point2 p);

/// Connected components of nodes, linking the four corners of every element
/// flagged in `solid`. Nodes not touched by any solid element get label -1.
std::vector<int> node_components(const GridSize& grid, const BoolGrid& solid);

}  // namespace topoforge
