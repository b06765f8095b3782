#include "topoforge/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace topoforge {

namespace {

int snap_axis(double coord, int cells) {
  const double base = std::floor(coord);
  const double frac = coord - base;
  int idx;
  if (std::abs(frac - 0.5) < 1e-9) {
    idx = coord < 0.5 * cells ? static_cast<int>(base) : static_cast<int>(base) + 1;
  } else {
    idx = static_cast<int>(std::lround(coord));
  }
  return std::clamp(idx, 0, cells);
}

int containing_cell(double coord, int cells) {
  // Ceil-minus-one sends points on a border to the lower cell.
  const int idx = static_cast<int>(std::ceil(coord)) - 1;
  return std::clamp(idx, 0, cells - 1);
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::pair<int, int> nearest_node(const GridSize& grid, Point2 p) {
  return {snap_axis(p.x * grid.nelx, grid.nelx), snap_axis(p.y * grid.nely, grid.nely)};
}

Point2 node_position(const GridSize& grid, int i, int j) {
  return {static_cast<double>(i) / grid.nelx, static_cast<double>(j) / grid.nely};
}

std::pair<int, int> containing_element(const GridSize& grid, Point2 p) {
  const int col = containing_cell(p.x * grid.nelx, grid.nelx);
  const int level = containing_cell(p.y * grid.nely, grid.nely);
  return {grid.nely - 1 - level, col};
}

NodalStencil load_stencil(const GridSize& grid, Point2 p) {
  const auto [row, col] = containing_element(grid, p);
  const int level = grid.nely - 1 - row;
  const double fx = std::clamp(p.x * grid.nelx - col, 0.0, 1.0);
  const double fy = std::clamp(p.y * grid.nely - level, 0.0, 1.0);
  NodalStencil s;
  s.nodes = grid.element_nodes(row, col);
  s.weights = {(1 - fx) * (1 - fy), fx * (1 - fy), fx * fy, (1 - fx) * fy};
  return s;
}

std::vector<int> node_components(const GridSize& grid, const BoolGrid& solid) {
  DisjointSet sets(grid.nodes());
  std::vector<std::uint8_t> touched(grid.nodes(), 0);
  for (int row = 0; row < grid.nely; ++row) {
    for (int col = 0; col < grid.nelx; ++col) {
      if (!solid[grid.element(row, col)]) continue;
      const auto nodes = grid.element_nodes(row, col);
      for (std::size_t k = 0; k < 4; ++k) {
        touched[nodes[k]] = 1;
        sets.unite(static_cast<int>(nodes[0]), static_cast<int>(nodes[k]));
      }
    }
  }
  std::vector<int> label(grid.nodes(), -1);
  for (std::size_t n = 0; n < grid.nodes(); ++n) {
    if (touched[n]) label[n] = sets.find(static_cast<int>(n));
  }
  return label;
}

}  // namespace topoforge
