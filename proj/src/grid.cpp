#include "topoforge/grid.hpp"

#include "topoforge/error.hpp"

namespace topoforge {

RleRuns rle_encode(const BoolGrid& bits) {
  RleRuns runs;
  std::size_t i = 0;
  while (i < bits.size()) {
    if (!bits[i]) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < bits.size() && bits[i]) ++i;
    runs.emplace_back(start, i - start);
  }
  return runs;
}

BoolGrid rle_decode(const RleRuns& runs, std::size_t size) {
  BoolGrid bits(size, 0);
  for (const auto& [start, count] : runs) {
    if (start > size || count > size - start) {
      throw Error(ErrorCode::InvalidArgument, "RLE run exceeds grid size");
    }
    for (std::size_t k = 0; k < count; ++k) bits[start + k] = 1;
  }
  return bits;
}

}  // namespace topoforge
