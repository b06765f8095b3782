#include "topoforge/filter.hpp"

#include <algorithm>
#include <cmath>

#include "topoforge/error.hpp"

namespace topoforge {

DensityFilter::DensityFilter(GridSize grid, const BoolGrid& support, double rmin) : support_(support) {
  if (!(rmin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "filter radius must be non-negative");
  if (support.size() != grid.elements()) throw Error(ErrorCode::DimensionMismatch, "filter support does not match grid");
  const int reach = std::max(0, static_cast<int>(std::ceil(rmin)) - 1);
  row_start_.reserve(grid.elements() + 1);
  row_sum_.assign(grid.elements(), 0.0);
  row_start_.push_back(0);
  for (int r = 0; r < grid.nely; ++r) {
    for (int c = 0; c < grid.nelx; ++c) {
      const std::size_t e = grid.element(r, c);
      if (support_[e]) {
        for (int rr = std::max(r - reach, 0); rr <= std::min(r + reach, grid.nely - 1); ++rr) {
          for (int cc = std::max(c - reach, 0); cc <= std::min(c + reach, grid.nelx - 1); ++cc) {
            const std::size_t n = grid.element(rr, cc);
            if (!support_[n]) continue;
            const double w = rmin - std::hypot(static_cast<double>(r - rr), static_cast<double>(c - cc));
            if (w > 0.0) {
              entries_.push_back({n, w});
              row_sum_[e] += w;
            }
          }
        }
      }
      row_start_.push_back(entries_.size());
    }
  }
}

std::span<const DensityFilter::Entry> DensityFilter::row(std::size_t element) const {
  return std::span(entries_).subspan(row_start_[element], row_start_[element + 1] - row_start_[element]);
}

std::vector<double> DensityFilter::apply(std::span<const double> x) const {
  if (x.size() != support_.size()) throw Error(ErrorCode::DimensionMismatch, "filter input size mismatch");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t e = 0; e < support_.size(); ++e) {
    if (!support_[e] || row_sum_[e] <= 0.0) continue;
    double acc = 0.0;
    for (const Entry& en : row(e)) acc += en.weight * x[en.column];
    out[e] = acc / row_sum_[e];
  }
  return out;
}

std::vector<double> DensityFilter::apply_adjoint(std::span<const double> g) const {
  if (g.size() != support_.size()) throw Error(ErrorCode::DimensionMismatch, "filter input size mismatch");
  std::vector<double> out(g.begin(), g.end());
  for (std::size_t e = 0; e < support_.size(); ++e) {
    if (support_[e] && row_sum_[e] > 0.0) out[e] = 0.0;
  }
  for (std::size_t e = 0; e < support_.size(); ++e) {
    if (!support_[e] || row_sum_[e] <= 0.0) continue;
    const double scaled = g[e] / row_sum_[e];
    for (const Entry& en : row(e)) out[en.column] += en.weight * scaled;
  }
  return out;
}

DensityFilter build_filter(const DesignProblem& problem, double rmin) {
  return DensityFilter(problem.grid, problem.domain, rmin);
}

}  // namespace topoforge
