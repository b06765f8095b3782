#include "topoforge/run.hpp"

#include <cmath>

#include <fmt/format.h>

#include "topoforge/problem_json.hpp"

namespace topoforge {

namespace fs = std::filesystem;
using nlohmann::json;

json RunManifest::to_json() const { return {{"files", files}}; }

json compliance_to_json(double compliance) { return std::isfinite(compliance) ? json(compliance) : json(nullptr); }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularSystem:
    case ErrorCode::BisectionFailure:
      return 3;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::RemoteProtocolError:
    case ErrorCode::Timeout:
      return 4;
    default:
      return 2;
  }
}

DesignProblem problem_from_request(const RunRequest& request, std::vector<Diagnostic>* diagnostics) {
  request.params.check();
  const Palette palette = default_palette();
  const RasterSketch sketch = decode_png_rgba(request.sketch_png);
  ParseParams pp;
  pp.load_angle_deg = request.params.load_angle_deg;
  pp.volume_fraction = request.params.volume_fraction;
  pp.grid = request.grid;
  DesignProblem problem = parse_sketch(sketch, palette, pp);
  if (request.mask_png) {
    BoolGrid mask = parse_mask(decode_png_rgba(*request.mask_png), palette, problem.grid);
    // Mask strokes on a separate layer still imply material underneath.
    for (std::size_t e = 0; e < mask.size(); ++e) mask[e] = mask[e] && problem.domain[e];
    problem.mask = std::move(mask);
  }
  std::vector<Diagnostic> diags = validate_problem(problem);
  if (has_errors(diags)) {
    std::string msg;
    for (const auto& d : diags) {
      if (d.severity == Severity::Error) msg += fmt::format("{}{}: {}", msg.empty() ? "" : "; ", to_string(d.kind), d.message);
    }
    throw Error(ErrorCode::InvalidArgument, msg);
  }
  if (diagnostics) *diagnostics = std::move(diags);
  return problem;
}

namespace {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace

std::string summary_csv(const BatchStats& stats) {
  std::string out = "run_id,seed,compliance,vf_global_pct,vf_editable_pct,converged,iterations\n";
  for (const auto& r : stats.runs) {
    const std::string seed = r.seed ? std::to_string(*r.seed) : "";
    if (!r.ok) {
      out += fmt::format("{},{},nan,nan,nan,false,0\n", r.run_id, seed);
      continue;
    }
    out += fmt::format("{},{},{},{},{},{},{}\n", r.run_id, seed, format_number(r.report.compliance),
                       format_number(100.0 * r.report.vf_global), format_number(100.0 * r.report.vf_editable),
                       r.output.converged ? "true" : "false", r.output.iterations);
  }
  return out;
}

json summary_json(const BatchStats& stats) {
  return {
      {"n", stats.n},
      {"compliance_mean", stats.compliance_mean},
      {"compliance_std", stats.compliance_std},
      {"vf_mean_pct", stats.vf_mean_pct},
      {"vf_std_pct", stats.vf_std_pct},
      {"requested", stats.requested},
      {"std_undefined", stats.std_undefined},
  };
}

json report_to_json(const EvaluationReport& report) {
  return {
      {"threshold", report.threshold},
      {"compliance", compliance_to_json(report.compliance)},
      {"vf_global_pct", 100.0 * report.vf_global},
      {"vf_editable_pct", 100.0 * report.vf_editable},
      {"singular", report.singular},
      {"solver", {{"iterations", report.solver.iterations}, {"relative_residual", report.solver.relative_residual}}},
      {"diagnostics", report.diagnostics},
  };
}

RunOutcome execute_run(const RunRequest& request, const PipelineConfig& config, const fs::path& run_dir) {
  RunOutcome outcome;
  outcome.problem = problem_from_request(request, &outcome.diagnostics);

  std::optional<DensityField> prior;
  if (request.prior_png) prior = gray_to_density(decode_png_gray(*request.prior_png), outcome.problem);

  outcome.stats = batch_run(outcome.problem, request.params, prior, config);

  fs::create_directories(run_dir / "structures");
  RunManifest& manifest = outcome.manifest;
  manifest.root = run_dir;
  auto emit = [&](const std::string& rel, auto&& data) {
    write_file(run_dir / rel, data);
    manifest.files.push_back(rel);
  };

  DesignProblem stored = outcome.problem;
  stored.volume_fraction = request.params.volume_fraction;
  emit("problem.json", problem_to_json(stored).dump(2) + "\n");
  emit("sketch.png", request.sketch_png);
  if (request.mask_png) emit("mask.png", *request.mask_png);
  if (request.prior_png) emit("prior.png", *request.prior_png);

  json reports = json::array();
  for (const auto& r : outcome.stats.runs) {
    json entry = {{"run_id", r.run_id}, {"seed", r.seed ? json(*r.seed) : json(nullptr)}, {"ok", r.ok}};
    if (r.ok) {
      const std::string rel = fmt::format("structures/run_{:03d}.png", r.run_id);
      emit(rel, encode_png(density_to_gray(r.output.field)));
      outcome.structure_files.push_back(rel);
      entry["structure"] = rel;
      entry["converged"] = r.output.converged;
      entry["iterations"] = r.output.iterations;
      entry["report"] = report_to_json(r.report);
    } else {
      outcome.structure_files.emplace_back();
      entry["error"] = r.error;
    }
    reports.push_back(std::move(entry));
  }
  emit("reports.json", reports.dump(2) + "\n");
  emit("summary.csv", summary_csv(outcome.stats));
  emit("summary.json", summary_json(outcome.stats).dump(2) + "\n");

  json params = {
      {"volume_fraction", request.params.volume_fraction},
      {"load_angle_deg", request.params.load_angle_deg},
      {"strength", request.params.strength},
      {"backend", std::string(to_string(request.params.backend))},
      {"batch_count", request.params.batch_count},
      {"seed", request.params.seed ? json(*request.params.seed) : json(nullptr)},
      {"grid", {{"nelx", request.grid.nelx}, {"nely", request.grid.nely}}},
  };
  json manifest_json = manifest.to_json();
  manifest_json["files"].push_back("manifest.json");
  manifest_json["params"] = params;
  write_file(run_dir / "manifest.json", manifest_json.dump(2) + "\n");
  manifest.files.push_back("manifest.json");

  if (outcome.stats.n == 0) {
    for (const auto& r : outcome.stats.runs) {
      if (!r.ok) throw Error(r.error_code, r.error);
    }
    throw Error(ErrorCode::SingularSystem, "no run produced a structure with a finite compliance");
  }
  return outcome;
}

}  // namespace topoforge
