#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "topoforge/fem.hpp"
#include "topoforge/filter.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

struct SolverConfig {
  double rmin = 2.0;  ///< filter radius, element units
  double move_limit = 0.2;
  int max_iters = 200;
  double change_tol = 0.01;  ///< on the L-inf design change
  double bisection_tol = 1e-4;
  double eta = 0.5;  ///< OC damping exponent

  void check() const;
};

struct OptimizationResult {
  DensityField density;  ///< filtered (physical) densities
  DensityField design;   ///< OC design variables
  std::vector<double> compliance_history;
  double compliance = 0.0;  ///< of the final physical field
  double volume_fraction = 0.0;           ///< design mean over the editable set
  double physical_volume_fraction = 0.0;  ///< physical mean over the editable set
  int iterations = 0;
  bool converged = false;
};

/// Optimality-criteria step on the editable elements (mask, or domain when no
/// mask), with the Lagrange multiplier found by bisection so the editable
/// mean hits the problem's volume fraction. Other elements are copied
/// unchanged. Throws BisectionFailure when the target is out of reach of the
/// move limit or the sensitivities are unusable.
DensityField oc_update(const DensityField& rho, std::span<const double> sens, const DesignProblem& problem,
                       const SolverConfig& cfg);

/// Called after every density update with the iteration number, the design
/// variables and the physical densities.
using IterationObserver = std::function<void(int, const DensityField&, const DensityField&)>;

/// SIMP compliance minimization: solve, sensitivities, filter adjoint, OC
/// update, until the design change drops below `change_tol` or `max_iters`.
/// With a mask only mask elements change and the volume target applies to
/// them; `init` supplies the frozen values and the warm start.
OptimizationResult optimize(const DesignProblem& problem, const SolverConfig& cfg, const MaterialParams& mp,
                            const std::optional<DensityField>& init = std::nullopt,
                            const IterationObserver& observer = {});

/// Starting field: `volume_fraction` on editable elements, 1 on frozen domain
/// elements, 0 outside the domain.
DensityField default_initial_field(const DesignProblem& problem);

double editable_mean(const DensityField& field, const BoolGrid& editable);

}  // namespace topoforge
