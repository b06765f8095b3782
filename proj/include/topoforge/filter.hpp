#pragma once

#include <span>
#include <utility>
#include <vector>

#include "topoforge/grid.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

/// Linear density filter with cone weights max(0, rmin - d) over
/// element-centre distances, restricted to a support set of elements. Rows
/// are normalized; elements outside the support pass through unchanged.
class DensityFilter {
 public:
  struct Entry {
    std::size_t column;
    double weight;
  };

  DensityFilter(GridSize grid, const BoolGrid& support, double rmin);

  std::vector<double> apply(std::span<const double> x) const;
  /// Transpose of `apply` restricted to the support; used to chain
  /// sensitivities from filtered to design densities.
  std::vector<double> apply_adjoint(std::span<const double> g) const;

  std::span<const Entry> row(std::size_t element) const;
  double row_sum(std::size_t element) const { return row_sum_[element]; }
  bool in_support(std::size_t element) const { return support_[element] != 0; }
  std::size_t size() const { return support_.size(); }

 private:
  BoolGrid support_;
  std::vector<std::size_t> row_start_;
  std::vector<Entry> entries_;
  std::vector<double> row_sum_;
};

/// Filter over the problem's domain.
DensityFilter build_filter(const DesignProblem& problem, double rmin);

}  // namespace topoforge
