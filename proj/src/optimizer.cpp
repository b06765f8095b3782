#include "topoforge/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "topoforge/error.hpp"

namespace topoforge {

void SolverConfig::check() const {
  if (!(rmin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rmin must be non-negative");
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw Error(ErrorCode::InvalidArgument, "move_limit must lie in (0, 1]");
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "eta must lie in (0, 1]");
  if (max_iters < 0) throw Error(ErrorCode::InvalidArgument, "max_iters must be non-negative");
  if (!(change_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "change_tol must be positive");
  if (!(bisection_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "bisection_tol must be positive");
}

double editable_mean(const DensityField& field, const BoolGrid& editable) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < editable.size(); ++e) {
    if (!editable[e]) continue;
    sum += field.rho[e];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

constexpr double kLambdaLow = 1e-9;
constexpr double kLambdaHigh = 1e9;
constexpr int kMaxHalvings = 200;

struct OcStep {
  DensityField field;
  bool reachable = true;  // target volume within the move-limited range
};

class OcKernel {
 public:
  OcKernel(const DensityField& rho, std::span<const double> sens, const BoolGrid& editable, const SolverConfig& cfg)
      : rho_(rho), sens_(sens), editable_(editable), cfg_(cfg) {
    for (std::size_t e = 0; e < editable.size(); ++e) {
      if (!editable[e]) continue;
      if (!std::isfinite(sens[e])) {
        throw Error(ErrorCode::BisectionFailure, fmt::format("non-finite sensitivity at element {}", e));
      }
      ++count_;
    }
  }

  std::size_t count() const { return count_; }

  double value(std::size_t e, double lambda) const {
    const double x = rho_.rho[e];
    const double lo = std::max(0.0, x - cfg_.move_limit);
    const double hi = std::min(1.0, x + cfg_.move_limit);
    const double drive = std::max(0.0, -sens_[e]) / lambda;
    return std::clamp(x * std::pow(drive, cfg_.eta), lo, hi);
  }

  double mean(double lambda) const {
    double sum = 0.0;
    for (std::size_t e = 0; e < editable_.size(); ++e) {
      if (editable_[e]) sum += value(e, lambda);
    }
    return sum / static_cast<double>(count_);
  }

  DensityField build(double lambda) const {
    DensityField out = rho_;
    for (std::size_t e = 0; e < editable_.size(); ++e) {
      if (editable_[e]) out.rho[e] = value(e, lambda);
    }
    return out;
  }

 private:
  const DensityField& rho_;
  std::span<const double> sens_;
  const BoolGrid& editable_;
  const SolverConfig& cfg_;
  std::size_t count_ = 0;
};

OcStep oc_step(const DensityField& rho, std::span<const double> sens, const BoolGrid& editable, double target,
               const SolverConfig& cfg) {
  if (sens.size() != rho.rho.size() || editable.size() != rho.rho.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sensitivity size does not match density field");
  }
  const OcKernel kernel(rho, sens, editable, cfg);
  if (kernel.count() == 0) return {rho, true};

  // Mean density is non-increasing in lambda.
  const double vol_max = kernel.mean(kLambdaLow);
  const double vol_min = kernel.mean(kLambdaHigh);
  if (vol_max < target - cfg.bisection_tol) return {kernel.build(kLambdaLow), false};
  if (vol_min > target + cfg.bisection_tol) return {kernel.build(kLambdaHigh), false};

  double lo = kLambdaLow;
  double hi = kLambdaHigh;
  for (int k = 0; k < kMaxHalvings && hi - lo > 1e-14 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (kernel.mean(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double lambda = 0.5 * (lo + hi);
  double achieved = kernel.mean(lambda);
  if (std::abs(achieved - target) > cfg.bisection_tol) {
    // A flat stretch of the volume curve can leave the midpoint off target
    // while one end of the final bracket is on it.
    for (const double candidate : {lo, hi}) {
      if (std::abs(kernel.mean(candidate) - target) <= cfg.bisection_tol) {
        lambda = candidate;
        achieved = kernel.mean(candidate);
        break;
      }
    }
  }
  if (std::abs(achieved - target) > cfg.bisection_tol) {
    throw Error(ErrorCode::BisectionFailure,
                fmt::format("volume {} misses target {} after bisection", achieved, target));
  }
  return {kernel.build(lambda), true};
}

}  // namespace

DensityField oc_update(const DensityField& rho, std::span<const double> sens, const DesignProblem& problem,
                       const SolverConfig& cfg) {
  cfg.check();
  const BoolGrid editable = problem.active_set();
  OcStep step = oc_step(rho, sens, editable, problem.volume_fraction, cfg);
  if (!step.reachable) {
    throw Error(ErrorCode::BisectionFailure,
                fmt::format("volume target {} is not bracketed within the move limit", problem.volume_fraction));
  }
  return std::move(step.field);
}

DensityField default_initial_field(const DesignProblem& problem) {
  DensityField f{problem.grid, std::vector<double>(problem.grid.elements(), 0.0), problem.domain};
  const BoolGrid editable = problem.active_set();
  for (std::size_t e = 0; e < f.rho.size(); ++e) {
    if (editable[e]) {
      f.rho[e] = problem.volume_fraction;
    } else if (problem.domain[e]) {
      f.rho[e] = 1.0;
    }
  }
  return f;
}

OptimizationResult optimize(const DesignProblem& problem, const SolverConfig& cfg, const MaterialParams& mp,
                            const std::optional<DensityField>& init, const IterationObserver& observer) {
  check_problem(problem);
  cfg.check();
  mp.check();
  const BoolGrid editable = problem.active_set();
  for (std::size_t e = 0; e < editable.size(); ++e) {
    if (editable[e] && !problem.domain[e]) {
      throw Error(ErrorCode::InvalidArgument, "mask extends outside the domain");
    }
  }

  DensityField design = default_initial_field(problem);
  if (init) {
    if (init->grid != problem.grid || init->rho.size() != problem.grid.elements()) {
      throw Error(ErrorCode::DimensionMismatch, "initial field does not match the problem grid");
    }
    for (std::size_t e = 0; e < design.rho.size(); ++e) {
      if (!(init->rho[e] >= 0.0 && init->rho[e] <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("initial density outside [0, 1] at element {}", e));
      }
      design.rho[e] = problem.domain[e] ? init->rho[e] : 0.0;
    }
  }

  const DensityFilter filter(problem.grid, editable, cfg.rmin);
  auto physical_of = [&](const DensityField& x) {
    DensityField p = x;
    p.rho = filter.apply(x.rho);
    return p;
  };

  PlaneStressSolver solver(problem, mp);
  OptimizationResult result;
  DensityField physical = physical_of(design);
  const bool nothing_editable = std::none_of(editable.begin(), editable.end(), [](auto b) { return b != 0; });

  if (!nothing_editable) {
    bool on_target = false;
    for (int it = 1; it <= cfg.max_iters; ++it) {
      const FemSolution sol = solver.solve(physical);
      result.compliance_history.push_back(sol.compliance);
      const std::vector<double> sens = filter.apply_adjoint(compliance_sensitivity(physical, sol, mp));

      OcStep step = oc_step(design, sens, editable, problem.volume_fraction, cfg);
      on_target = step.reachable;
      double change = 0.0;
      for (std::size_t e = 0; e < editable.size(); ++e) {
        if (editable[e]) change = std::max(change, std::abs(step.field.rho[e] - design.rho[e]));
      }
      design = std::move(step.field);
      physical = physical_of(design);
      result.iterations = it;
      if (observer) observer(it, design, physical);
      if (change < cfg.change_tol && on_target) {
        result.converged = true;
        break;
      }
    }
  } else {
    result.converged = true;
  }

  result.compliance = solver.solve(physical).compliance;
  if (nothing_editable) result.compliance_history.push_back(result.compliance);
  result.volume_fraction = editable_mean(design, editable);
  result.physical_volume_fraction = editable_mean(physical, editable);
  result.design = std::move(design);
  result.density = std::move(physical);
  return result;
}

}  // namespace topoforge
