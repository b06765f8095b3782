#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace topoforge {

/// Element grid dimensions. Elements are stored row-major with row 0 at the
/// top, matching raster order; physical y grows upward.
struct GridSize {
  int nelx = 0;
  int nely = 0;

  std::size_t elements() const { return static_cast<std::size_t>(nelx) * static_cast<std::size_t>(nely); }
  std::size_t nodes() const { return static_cast<std::size_t>(nelx + 1) * static_cast<std::size_t>(nely + 1); }
  std::size_t dofs() const { return 2 * nodes(); }

  std::size_t element(int row, int col) const { return static_cast<std::size_t>(row) * nelx + col; }
  /// Node index from column i (0..nelx) and level j counted from the bottom (0..nely).
  std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * (nelx + 1) + i; }

  /// Nodes of the element at (row, col) in counter-clockwise order starting
  /// at the lower-left corner.
  std::array<std::size_t, 4> element_nodes(int row, int col) const {
    const int j = nely - 1 - row;
    return {node(col, j), node(col + 1, j), node(col + 1, j + 1), node(col, j + 1)};
  }

  friend bool operator==(const GridSize&, const GridSize&) = default;
};

/// Per-element boolean layer (domain, mask, binary structure).
using BoolGrid = std::vector<std::uint8_t>;

/// Run-length encoding over row-major elements: (start index, count) per run of true values.
using RleRuns = std::vector<std::pair<std::size_t, std::size_t>>;

RleRuns rle_encode(const BoolGrid& bits);
BoolGrid rle_decode(const RleRuns& runs, std::size_t size);

/// Nearest-neighbour resampling of a row-major layer between grid sizes.
template <typename T>
std::vector<T> resample_nearest(const std::vector<T>& src, int src_w, int src_h, int dst_w, int dst_h) {
  std::vector<T> out(static_cast<std::size_t>(dst_w) * dst_h);
  for (int r = 0; r < dst_h; ++r) {
    const int sr = static_cast<int>((static_cast<long long>(2 * r + 1) * src_h) / (2LL * dst_h));
    for (int c = 0; c < dst_w; ++c) {
      const int sc = static_cast<int>((static_cast<long long>(2 * c + 1) * src_w) / (2LL * dst_w));
      out[static_cast<std::size_t>(r) * dst_w + c] = src[static_cast<std::size_t>(sr) * src_w + sc];
    }
  }
  return out;
}

}  // namespace topoforge
