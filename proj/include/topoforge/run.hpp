#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topoforge/error.hpp"
#include "topoforge/image_io.hpp"
#include "topoforge/pipeline.hpp"

namespace topoforge {

inline constexpr GridSize kDefaultGrid{64, 64};

/// One solve request as the CLI and the HTTP API both receive it.
struct RunRequest {
  Bytes sketch_png;
  std::optional<Bytes> mask_png;
  std::optional<Bytes> prior_png;  ///< grayscale, 255 = solid
  GenerationParams params;
  GridSize grid = kDefaultGrid;
};

/// Files of a run directory, relative to its root.
struct RunManifest {
  std::filesystem::path root;
  std::vector<std::string> files;

  nlohmann::json to_json() const;
};

struct RunOutcome {
  DesignProblem problem;
  std::vector<Diagnostic> diagnostics;
  BatchStats stats;
  RunManifest manifest;
  std::vector<std::string> structure_files;  ///< per run, empty for failed runs
};

/// Decodes the sketch (and mask), parses and validates the problem.
/// Validation errors raise InvalidArgument.
DesignProblem problem_from_request(const RunRequest& request, std::vector<Diagnostic>* diagnostics = nullptr);

/// Generates, evaluates and writes the run directory. Throws the first run's
/// error when every run failed, after the directory has been written.
RunOutcome execute_run(const RunRequest& request, const PipelineConfig& config, const std::filesystem::path& run_dir);

/// Batch report: run_id,seed,compliance,vf_global_pct,vf_editable_pct,converged,iterations
std::string summary_csv(const BatchStats& stats);
/// {n, compliance_mean, compliance_std, vf_mean_pct, vf_std_pct, ...}
nlohmann::json summary_json(const BatchStats& stats);
nlohmann::json report_to_json(const EvaluationReport& report);

/// Infinite compliance serializes as null.
nlohmann::json compliance_to_json(double compliance);

/// CLI exit status for a pipeline error: 2 input, 3 solver, 4 remote backend.
int exit_code_for(ErrorCode code);

}  // namespace topoforge
