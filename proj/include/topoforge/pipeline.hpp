#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoforge/error.hpp"
#include "topoforge/fem.hpp"
#include "topoforge/image_io.hpp"
#include "topoforge/optimizer.hpp"
#include "topoforge/problem.hpp"
#include "topoforge/remote.hpp"

namespace topoforge {

enum class Backend { Simp, Remote };

std::string_view to_string(Backend backend);
std::optional<Backend> backend_from_string(std::string_view name);

struct GenerationParams {
  double volume_fraction = 0.2;
  double load_angle_deg = 270.0;
  double strength = 0.7;  ///< departure from the prior; 0 keeps it, 1 ignores it
  Backend backend = Backend::Simp;
  int batch_count = 1;
  std::optional<std::uint64_t> seed;

  void check() const;
};

struct PipelineConfig {
  SolverConfig solver;
  MaterialParams material;
  RemoteConfig remote;
  double threshold = 0.5;
  /// Worker threads for batch members; 0 picks the hardware concurrency.
  unsigned threads = 1;
};

struct GenerationOutput {
  DensityField field;
  int iterations = 0;
  bool converged = true;
  std::vector<std::string> diagnostics;
};

/// Amplitude of the seeded initial-density perturbation.
inline constexpr double kSeedPerturbation = 0.05;

/// Produces one structure. Params override the problem's volume fraction
/// and load directions. Non-editable elements of the result equal the prior,
/// or the domain indicator when there is no prior.
GenerationOutput generate_detailed(const DesignProblem& problem, const GenerationParams& params,
                                   const std::optional<DensityField>& prior, const PipelineConfig& config);

DensityField generate(const DesignProblem& problem, const GenerationParams& params,
                      const std::optional<DensityField>& prior, const PipelineConfig& config);

/// Initial field handed to the SIMP backend (prior blend plus seeded noise).
DensityField simp_initial_field(const DesignProblem& problem, const GenerationParams& params,
                                const std::optional<DensityField>& prior);

inline constexpr double kInfiniteCompliance = std::numeric_limits<double>::infinity();

struct EvaluationReport {
  double threshold = 0.5;
  GridSize grid;
  BoolGrid structure;
  double vf_global = 0.0;    ///< solid fraction of the domain
  double vf_editable = 0.0;  ///< solid fraction of the mask, or of the domain without one
  double compliance = kInfiniteCompliance;
  bool singular = false;
  SolverDiagnostics solver;
  std::vector<std::string> diagnostics;
};

/// Thresholds the structure and runs the FE analysis on the solid/void
/// field. A structure with no load path, or an unsolvable system, reports
/// infinite compliance with a diagnostic instead of throwing.
EvaluationReport evaluate_structure(const DensityField& structure, const DesignProblem& problem,
                                    const MaterialParams& mp, double threshold = 0.5);
EvaluationReport evaluate_structure(const GrayImage& structure, const DesignProblem& problem,
                                    const MaterialParams& mp, double threshold = 0.5);

/// 8-bit grayscale, 255 = solid.
GrayImage density_to_gray(const DensityField& field);
/// Nearest-neighbour resampled to the problem grid; a warning is appended
/// when the size differs. Non-domain elements read as void.
DensityField gray_to_density(const GrayImage& image, const DesignProblem& problem,
                             std::vector<std::string>* warnings = nullptr);
/// Color images are classified with the palette (Material = solid,
/// anything else void); grayscale images use 255 = solid.
DensityField structure_from_png(std::span<const std::uint8_t> png, const DesignProblem& problem,
                                const Palette& palette, std::vector<std::string>* warnings = nullptr);

struct RunRecord {
  int run_id = 0;
  std::optional<std::uint64_t> seed;
  bool ok = false;
  std::string error;
  ErrorCode error_code = ErrorCode::InvalidArgument;
  GenerationOutput output;
  EvaluationReport report;
};

struct BatchStats {
  int n = 0;          ///< successful runs
  int requested = 0;  ///< runs attempted
  double compliance_mean = 0.0;
  double compliance_std = 0.0;
  double vf_mean_pct = 0.0;
  double vf_std_pct = 0.0;
  /// Standard deviations are undefined for n < 2 and reported as 0.
  bool std_undefined = true;
  std::vector<RunRecord> runs;
};

struct SampleStats {
  double mean = 0.0;
  double std = 0.0;  ///< sample (n - 1) standard deviation, 0 when n < 2
};

SampleStats sample_stats(std::span<const double> values);

/// Aggregates successful runs with finite compliance.
BatchStats aggregate(std::vector<RunRecord> runs);

struct BatchOptions {
  /// Seeds seed, seed+1, ... ; false repeats the base seed for every run.
  bool vary_seed = true;
};

/// Runs generate `batch_count` times and evaluates the 8-bit quantized
/// structures, so stored PNGs reproduce the reports exactly.
BatchStats batch_run(const DesignProblem& problem, const GenerationParams& params,
                     const std::optional<DensityField>& prior, const PipelineConfig& config,
                     const BatchOptions& options = {});

}  // namespace topoforge
