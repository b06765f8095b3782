#include "topoforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "topoforge/error.hpp"

namespace topoforge {

std::string_view to_string(Backend backend) { return backend == Backend::Simp ? "simp" : "remote"; }

std::optional<Backend> backend_from_string(std::string_view name) {
  if (name == "simp") return Backend::Simp;
  if (name == "remote") return Backend::Remote;
  return std::nullopt;
}

void GenerationParams::check() const {
  if (!(volume_fraction > 0.0 && volume_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "volume_fraction must lie in (0, 1]");
  }
  if (!std::isfinite(load_angle_deg)) throw Error(ErrorCode::InvalidArgument, "load_angle_deg must be finite");
  if (!(strength >= 0.0 && strength <= 1.0)) throw Error(ErrorCode::InvalidArgument, "strength must lie in [0, 1]");
  if (batch_count < 1) throw Error(ErrorCode::InvalidArgument, "batch_count must be at least 1");
}

namespace {

DesignProblem with_params(const DesignProblem& problem, const GenerationParams& params) {
  DesignProblem p = problem;
  p.volume_fraction = params.volume_fraction;
  for (auto& load : p.loads) load.angle_deg = params.load_angle_deg;
  return p;
}

void check_prior(const std::optional<DensityField>& prior, const DesignProblem& problem) {
  if (!prior) return;
  if (prior->grid != problem.grid || prior->rho.size() != problem.grid.elements()) {
    throw Error(ErrorCode::DimensionMismatch, "prior does not match the problem grid");
  }
  for (double v : prior->rho) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "prior densities must lie in [0, 1]");
  }
}

// Portable uniform double in [0, 1) from the 53 high bits.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Frozen elements keep the prior (or the domain indicator); nothing lives outside the domain.
void impose_frozen(DensityField& field, const DesignProblem& problem, const std::optional<DensityField>& prior) {
  const BoolGrid editable = problem.active_set();
  field.domain = problem.domain;
  for (std::size_t e = 0; e < field.rho.size(); ++e) {
    if (!problem.domain[e]) {
      field.rho[e] = 0.0;
    } else if (!editable[e]) {
      field.rho[e] = prior ? prior->rho[e] : 1.0;
    }
  }
}

bool anchored(int nx, int ny) { return nx > 0 && ny > 0 && nx + ny >= 3; }

// Every positively weighted load node must sit on a solid component that the
// supports hold against rigid motion.
std::vector<std::string> load_path_gaps(const DesignProblem& problem, const BoolGrid& solid) {
  const GridSize& g = problem.grid;
  const std::vector<int> comp = node_components(g, solid);
  std::vector<int> fx(g.nodes(), 0), fy(g.nodes(), 0);
  std::vector<std::uint8_t> seen_x(g.nodes(), 0), seen_y(g.nodes(), 0);
  for (const auto& f : problem.fixings) {
    const auto [i, j] = nearest_node(g, f.position);
    const std::size_t node = g.node(i, j);
    if (comp[node] < 0) continue;
    if (f.kind != FixKind::FixY && !seen_x[node]) {
      seen_x[node] = 1;
      ++fx[comp[node]];
    }
    if (f.kind != FixKind::FixX && !seen_y[node]) {
      seen_y[node] = 1;
      ++fy[comp[node]];
    }
  }
  std::vector<std::string> gaps;
  for (std::size_t l = 0; l < problem.loads.size(); ++l) {
    const NodalStencil s = load_stencil(g, problem.loads[l].position);
    for (std::size_t k = 0; k < 4; ++k) {
      if (s.weights[k] <= 1e-12) continue;
      const int c = comp[s.nodes[k]];
      if (c < 0 || !anchored(fx[c], fy[c])) {
        gaps.push_back(fmt::format("SingularRisk: load {} has no load path to the supports", l));
        break;
      }
    }
  }
  return gaps;
}

}  // namespace

DensityField simp_initial_field(const DesignProblem& problem, const GenerationParams& params,
                                const std::optional<DensityField>& prior) {
  const DesignProblem p = with_params(problem, params);
  check_prior(prior, p);
  DensityField init = default_initial_field(p);
  const BoolGrid editable = p.active_set();
  if (prior) {
    for (std::size_t e = 0; e < init.rho.size(); ++e) {
      if (!p.domain[e]) continue;
      init.rho[e] = editable[e] ? (1.0 - params.strength) * prior->rho[e] + params.strength * p.volume_fraction
                                : prior->rho[e];
    }
  }
  if (params.seed) {
    std::mt19937_64 rng(*params.seed);
    for (std::size_t e = 0; e < init.rho.size(); ++e) {
      if (!editable[e]) continue;
      const double noise = (2.0 * unit_draw(rng) - 1.0) * kSeedPerturbation;
      init.rho[e] = std::clamp(init.rho[e] + noise, 0.0, 1.0);
    }
  }
  return init;
}

GenerationOutput generate_detailed(const DesignProblem& problem, const GenerationParams& params,
                                   const std::optional<DensityField>& prior, const PipelineConfig& config) {
  params.check();
  const DesignProblem p = with_params(problem, params);
  check_problem(p);
  check_prior(prior, p);

  GenerationOutput out;
  if (params.backend == Backend::Simp) {
    OptimizationResult res = optimize(p, config.solver, config.material, simp_initial_field(p, params, prior));
    out.field = std::move(res.density);
    out.iterations = res.iterations;
    out.converged = res.converged;
  } else {
    RemoteRequest request;
    request.sketch_png = encode_png(render_problem(p, default_palette(), p.grid.nelx, p.grid.nely));
    if (p.mask) request.mask_png = encode_png(render_mask(p, default_palette()));
    request.volume_fraction = params.volume_fraction;
    request.load_angle_deg = params.load_angle_deg;
    request.strength = params.strength;
    request.seed = params.seed;
    const RemoteResponse response = remote_generate(config.remote, request);
    out.field = gray_to_density(response.structure, p, &out.diagnostics);
    out.iterations = 0;
    out.converged = true;
  }
  impose_frozen(out.field, p, prior);
  return out;
}

DensityField generate(const DesignProblem& problem, const GenerationParams& params,
                      const std::optional<DensityField>& prior, const PipelineConfig& config) {
  return generate_detailed(problem, params, prior, config).field;
}

GrayImage density_to_gray(const DensityField& field) {
  GrayImage img{field.grid.nelx, field.grid.nely, std::vector<std::uint8_t>(field.rho.size())};
  for (std::size_t e = 0; e < field.rho.size(); ++e) {
    img.pixels[e] = static_cast<std::uint8_t>(std::lround(std::clamp(field.rho[e], 0.0, 1.0) * 255.0));
  }
  return img;
}

DensityField gray_to_density(const GrayImage& image, const DesignProblem& problem, std::vector<std::string>* warnings) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::DimensionMismatch, "structure image size does not match its dimensions");
  }
  const GridSize& g = problem.grid;
  std::vector<std::uint8_t> px = image.pixels;
  if (image.width != g.nelx || image.height != g.nely) {
    px = resample_nearest(px, image.width, image.height, g.nelx, g.nely);
    if (warnings) {
      warnings->push_back(fmt::format("structure resampled from {}x{} to the {}x{} grid", image.width, image.height,
                                      g.nelx, g.nely));
    }
  }
  DensityField f{g, std::vector<double>(g.elements(), 0.0), problem.domain};
  for (std::size_t e = 0; e < f.rho.size(); ++e) {
    if (problem.domain[e]) f.rho[e] = px[e] / 255.0;
  }
  return f;
}

DensityField structure_from_png(std::span<const std::uint8_t> png, const DesignProblem& problem,
                                const Palette& palette, std::vector<std::string>* warnings) {
  if (!png_has_color(png)) return gray_to_density(decode_png_gray(png), problem, warnings);
  const RasterSketch rgba = decode_png_rgba(png);
  GrayImage img{rgba.width, rgba.height, std::vector<std::uint8_t>(rgba.pixels.size())};
  for (std::size_t k = 0; k < rgba.pixels.size(); ++k) {
    img.pixels[k] = classify(rgba.pixels[k], palette) == Role::Background ? 0 : 255;
  }
  return gray_to_density(img, problem, warnings);
}

EvaluationReport evaluate_structure(const DensityField& structure, const DesignProblem& problem,
                                    const MaterialParams& mp, double threshold) {
  check_problem(problem);
  if (structure.grid != problem.grid || structure.rho.size() != problem.grid.elements()) {
    throw Error(ErrorCode::DimensionMismatch, "structure does not match the problem grid");
  }
  EvaluationReport report;
  report.threshold = threshold;
  report.grid = problem.grid;
  report.structure.assign(problem.grid.elements(), 0);

  const BoolGrid editable = problem.active_set();
  std::size_t domain_n = 0, domain_solid = 0, edit_n = 0, edit_solid = 0;
  for (std::size_t e = 0; e < report.structure.size(); ++e) {
    const bool solid = problem.domain[e] && structure.rho[e] >= threshold;
    report.structure[e] = solid;
    domain_n += problem.domain[e];
    domain_solid += solid;
    edit_n += editable[e];
    edit_solid += solid && editable[e];
  }
  report.vf_global = domain_n ? static_cast<double>(domain_solid) / static_cast<double>(domain_n) : 0.0;
  report.vf_editable = edit_n ? static_cast<double>(edit_solid) / static_cast<double>(edit_n) : 0.0;

  auto gaps = load_path_gaps(problem, report.structure);
  if (!gaps.empty()) {
    report.singular = true;
    report.compliance = kInfiniteCompliance;
    for (auto& gap : gaps) report.diagnostics.push_back(std::move(gap));
    return report;
  }
  DensityField binary{problem.grid, std::vector<double>(report.structure.size(), 0.0), problem.domain};
  for (std::size_t e = 0; e < binary.rho.size(); ++e) binary.rho[e] = report.structure[e] ? 1.0 : 0.0;
  try {
    const FemSolution sol = assemble_and_solve(binary, problem, mp);
    report.compliance = sol.compliance;
    report.solver = sol.diagnostics;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularSystem) throw;
    report.singular = true;
    report.compliance = kInfiniteCompliance;
    report.diagnostics.push_back(e.what());
  }
  return report;
}

EvaluationReport evaluate_structure(const GrayImage& structure, const DesignProblem& problem, const MaterialParams& mp,
                                    double threshold) {
  std::vector<std::string> warnings;
  const DensityField field = gray_to_density(structure, problem, &warnings);
  EvaluationReport report = evaluate_structure(field, problem, mp, threshold);
  report.diagnostics.insert(report.diagnostics.begin(), warnings.begin(), warnings.end());
  return report;
}

SampleStats sample_stats(std::span<const double> values) {
  SampleStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return s;
}

BatchStats aggregate(std::vector<RunRecord> runs) {
  BatchStats stats;
  stats.requested = static_cast<int>(runs.size());
  std::vector<double> compliance, vf;
  for (const auto& r : runs) {
    if (!r.ok || !std::isfinite(r.report.compliance)) continue;
    compliance.push_back(r.report.compliance);
    vf.push_back(100.0 * r.report.vf_global);
  }
  stats.n = static_cast<int>(compliance.size());
  const SampleStats c = sample_stats(compliance);
  const SampleStats v = sample_stats(vf);
  stats.compliance_mean = c.mean;
  stats.compliance_std = c.std;
  stats.vf_mean_pct = v.mean;
  stats.vf_std_pct = v.std;
  stats.std_undefined = stats.n < 2;
  stats.runs = std::move(runs);
  return stats;
}

BatchStats batch_run(const DesignProblem& problem, const GenerationParams& params,
                     const std::optional<DensityField>& prior, const PipelineConfig& config,
                     const BatchOptions& options) {
  params.check();
  const DesignProblem p = with_params(problem, params);
  check_problem(p);

  std::vector<RunRecord> runs(static_cast<std::size_t>(params.batch_count));
  auto run_one = [&](std::size_t i) {
    RunRecord& rec = runs[i];
    rec.run_id = static_cast<int>(i);
    GenerationParams member = params;
    if (params.seed && options.vary_seed) member.seed = *params.seed + i;
    rec.seed = member.seed;
    try {
      rec.output = generate_detailed(p, member, prior, config);
      rec.report = evaluate_structure(density_to_gray(rec.output.field), p, config.material, config.threshold);
      rec.report.diagnostics.insert(rec.report.diagnostics.begin(), rec.output.diagnostics.begin(),
                                    rec.output.diagnostics.end());
      rec.ok = true;
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.error_code = e.code();
    }
  };

  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(runs.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) run_one(i);
      });
    }
  }
  return aggregate(std::move(runs));
}

}  // namespace topoforge
