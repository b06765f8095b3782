// Acceptance checks; prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <thread>

#include <fmt/format.h>

#include "fixtures.hpp"

#include <httplib.h>

#include "topoforge/pipeline.hpp"
#include "topoforge/problem_json.hpp"
#include "topoforge/run.hpp"
#include "topoforge/service.hpp"

using namespace topoforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS  " : "FAIL  ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

DesignProblem load_case() {
  const Bytes raw = read_file(fs::path(TOPOFORGE_DATA) / "case41.json");
  return problem_from_json(json::parse(raw.begin(), raw.end()));
}

json read_json(const fs::path& p) {
  const Bytes raw = read_file(p);
  return json::parse(raw.begin(), raw.end());
}

// Baseline optimum, reused as the prior of the masked run.
DensityField baseline_density;

void fea_baseline() {
  const DesignProblem p = load_case();
  const SolverConfig cfg;
  const MaterialParams mp;
  const auto t0 = Clock::now();
  const OptimizationResult r = optimize(p, cfg, mp);
  const EvaluationReport rep = evaluate_structure(r.density, p, mp, 0.5);
  const double elapsed = seconds_since(t0);
  baseline_density = r.density;

  const auto& h = r.compliance_history;
  const std::size_t n = h.size();
  const double plateau = n > 10 ? std::abs(h[n - 1] - h[n - 11]) / h[n - 1] : 1.0;
  const bool stopped = r.converged || r.iterations == cfg.max_iters;
  const bool converged = stopped && plateau < 1e-3;
  const bool c_ok = rep.compliance >= 0.75 * 63.40 && rep.compliance <= 1.25 * 63.40;
  const bool vf_ok = std::abs(rep.vf_global - 0.20) <= 0.01;
  const bool t_ok = elapsed < 60.0;
  report(converged && c_ok && vf_ok && t_ok, "FEA baseline (64x64 corner bracket)",
         fmt::format("compliance {:.2f} (target 63.40 +/-25%), vf_global {:.2f}% (20 +/-1), {} iterations, "
                     "change-tol reached: {}, last-10 relative compliance change {:.1e}, {:.1f} s",
                     rep.compliance, 100 * rep.vf_global, r.iterations, r.converged ? "yes" : "no", plateau, elapsed));
}

struct Outcome {
  bool ok;
  std::string detail;
};

Outcome masked_generation() {
  DesignProblem p = load_case();
  p.mask = BoolGrid(p.grid.elements(), 0);
  for (int r = 16; r < 48; ++r)
    for (int c = 16; c < 48; ++c) (*p.mask)[p.grid.element(r, c)] = 1;
  p.volume_fraction = 0.3;
  GenerationParams params;
  params.volume_fraction = 0.3;
  params.seed = 5;
  params.strength = 0.7;
  const PipelineConfig cfg;
  const DensityField& prior = baseline_density;
  const DensityField init = simp_initial_field(p, params, prior);

  bool frozen_ok = true;
  double worst_volume = 0.0;
  int steps = 0;
  const auto observer = [&](int, const DensityField& design, const DensityField& physical) {
    ++steps;
    for (std::size_t e = 0; e < design.rho.size(); ++e) {
      if ((*p.mask)[e]) continue;
      frozen_ok &= design.rho[e] == prior.rho[e] && physical.rho[e] == prior.rho[e];
    }
    worst_volume = std::max(worst_volume, std::abs(editable_mean(design, *p.mask) - 0.3));
  };
  const OptimizationResult r = optimize(p, cfg.solver, cfg.material, init, observer);

  const DensityField out = generate(p, params, prior, cfg);
  bool final_ok = true;
  for (std::size_t e = 0; e < out.rho.size(); ++e)
    if (!(*p.mask)[e]) final_ok &= out.rho[e] == prior.rho[e];
  const double design_err = std::abs(r.volume_fraction - 0.3);
  return {frozen_ok && final_ok && steps > 0 && design_err <= 1e-3 && worst_volume <= cfg.solver.bisection_tol,
          fmt::format("(a) frozen region bit-identical over {} iterations and in the output: {}; "
                      "(b) editable mean {:.6f} vs 0.3, worst per-iteration deviation {:.1e}",
                      steps, frozen_ok && final_ok ? "yes" : "no", r.volume_fraction, worst_volume)};
}

Outcome batch_protocol() {
  const DesignProblem p = fixtures::corner_bracket({32, 32});
  GenerationParams params;
  params.volume_fraction = 0.2;
  params.seed = 1;
  params.batch_count = 10;
  const BatchStats s = batch_run(p, params, std::nullopt, PipelineConfig{});
  const std::string csv = summary_csv(s);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  bool format_ok = line == "run_id,seed,compliance,vf_global_pct,vf_editable_pct,converged,iterations";
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    format_ok &= std::count(line.begin(), line.end(), ',') == 6;
  }
  const json summary = summary_json(s);
  for (const char* key : {"n", "compliance_mean", "compliance_std", "vf_mean_pct", "vf_std_pct"})
    format_ok &= summary.contains(key);
  return {format_ok && rows == 10 && s.n == 10 && s.compliance_std > 0.0,
          fmt::format("(c) 10 seeded runs on 32x32: compliance {:.2f} +/- {:.2f}, vf {:.2f} +/- {:.2f} %, "
                      "{} CSV rows, format ok: {}",
                      s.compliance_mean, s.compliance_std, s.vf_mean_pct, s.vf_std_pct, rows,
                      format_ok ? "yes" : "no")};
}

void generative_substitute() {
  const Outcome masked = masked_generation();
  const Outcome batch = batch_protocol();
  report(masked.ok && batch.ok, "Generative substitute suite", masked.detail + "; " + batch.detail);
}

void fem_correctness() {
  const auto t0 = Clock::now();
  const MaterialParams mp;
  std::mt19937_64 rng(2024);

  double worst_identity = 0.0;
  for (int k = 0; k < 100; ++k) {
    const DesignProblem p = fixtures::random_supported_problem(rng);
    const DensityField rho = fixtures::random_field(p, rng, 0.0, 1.0);
    const FemSolution s = assemble_and_solve(rho, p, mp);
    worst_identity = std::max(worst_identity, std::abs(s.compliance - s.work) / std::abs(s.work));
  }

  double worst_ke = 0.0;
  for (double nu : {0.0, 0.25, 0.3, 0.4, 0.49})
    worst_ke = std::max(worst_ke, (element_stiffness(nu) - fixtures::quadrature_stiffness(nu)).cwiseAbs().maxCoeff());

  double worst_fd = 0.0;
  for (int k = 0; k < 5; ++k) {
    const DesignProblem p = fixtures::random_supported_problem(rng, 4, 4);
    const DensityField rho = fixtures::random_field(p, rng, 0.2, 1.0);
    PlaneStressSolver solver(p, mp);
    const std::vector<double> g = compliance_sensitivity(rho, solver.solve(rho), mp);
    const double h = 1e-6;
    for (std::size_t e = 0; e < rho.rho.size(); ++e) {
      DensityField up = rho, down = rho;
      up.rho[e] += h;
      down.rho[e] -= h;
      const double fd = (solver.solve(up).compliance - solver.solve(down).compliance) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - g[e]) / std::abs(g[e]));
    }
  }
  const double elapsed = seconds_since(t0);
  report(worst_identity < 1e-8 && worst_ke < 1e-12 && worst_fd < 1e-4 && elapsed < 5.0, "FEM correctness",
         fmt::format("energy identity {:.1e} over 100 problems, stiffness vs quadrature {:.1e}, "
                     "finite differences {:.1e} on 4x4, {:.2f} s",
                     worst_identity, worst_ke, worst_fd, elapsed));
}

void monotonicity() {
  std::mt19937_64 rng(77);
  const MaterialParams mp;
  double worst = -1e300;
  int violations = 0;
  for (int k = 0; k < 50; ++k) {
    const DesignProblem p = fixtures::random_supported_problem(rng);
    const DensityField lo = fixtures::random_field(p, rng, 0.01, 1.0);
    DensityField hi = lo;
    for (double& v : hi.rho)
      if (v > 0) v += fixtures::rand_uniform(rng, 0.0, 1.0 - v);
    PlaneStressSolver solver(p, mp);
    const double c_hi = solver.solve(hi).compliance, c_lo = solver.solve(lo).compliance;
    worst = std::max(worst, c_hi - c_lo);
    if (c_hi > c_lo + 1e-9) ++violations;
  }
  report(violations == 0, "Monotonicity", fmt::format("50 pairs, {} violations, max c(hi) - c(lo) = {:.3e}",
                                                      violations, worst));
}

bool same_problem(const DesignProblem& a, const DesignProblem& b) {
  if (!(a.grid == b.grid && a.domain == b.domain && a.mask == b.mask && a.volume_fraction == b.volume_fraction))
    return false;
  if (a.loads.size() != b.loads.size() || a.fixings.size() != b.fixings.size()) return false;
  const double px = 1.0 / a.grid.nelx, py = 1.0 / a.grid.nely;
  for (const auto& l : a.loads) {
    const bool hit = std::any_of(b.loads.begin(), b.loads.end(), [&](const PointLoad& m) {
      return std::abs(m.position.x - l.position.x) <= px && std::abs(m.position.y - l.position.y) <= py &&
             m.magnitude == l.magnitude && m.angle_deg == l.angle_deg;
    });
    if (!hit) return false;
  }
  for (const auto& f : a.fixings) {
    const bool hit = std::any_of(b.fixings.begin(), b.fixings.end(), [&](const Fixing& g) {
      return g.kind == f.kind && std::abs(g.position.x - f.position.x) <= px &&
             std::abs(g.position.y - f.position.y) <= py;
    });
    if (!hit) return false;
  }
  return true;
}

void codec() {
  std::mt19937_64 rng(4242);
  const Palette pal = default_palette();
  int ok = 0;
  for (int k = 0; k < 100; ++k) {
    const DesignProblem a = fixtures::random_problem(rng);
    const RasterSketch img = decode_png_rgba(encode_png(render_problem(a, pal, a.grid.nelx, a.grid.nely)));
    const DesignProblem b = parse_sketch(
        img, pal, {.load_angle_deg = a.loads[0].angle_deg, .volume_fraction = a.volume_fraction});
    ok += same_problem(a, b);
  }

  const fs::path root = fixtures::scratch_dir("acceptance_determinism");
  RunRequest req;
  req.sketch_png = encode_png(fixtures::corner_bracket_sketch(32));
  req.grid = {32, 32};
  req.params.batch_count = 2;
  req.params.seed = 3;
  const RunOutcome first = execute_run(req, PipelineConfig{}, root / "a");
  execute_run(req, PipelineConfig{}, root / "b");
  bool identical = true;
  for (const auto& f : first.manifest.files) identical &= read_file(root / "a" / f) == read_file(root / "b" / f);
  const std::size_t files = first.manifest.files.size();
  fs::remove_all(root);

  report(ok == 100 && identical, "Codec round trip and run determinism",
         fmt::format("{}/100 problems survive render -> parse, {} run artifacts byte-identical: {}", ok, files,
                     identical ? "yes" : "no"));
}

int run_cli(const std::string& args) {
  const int raw = std::system((std::string(TOPOFORGE_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void service_conformance() {
  const fs::path root = fixtures::scratch_dir("acceptance_service");
  const Bytes sketch = encode_png(render_problem(load_case(), default_palette(), 64, 64));
  write_file(root / "sketch.png", sketch);

  ServiceConfig cfg;
  cfg.host = "127.0.0.1";
  cfg.port = 0;
  cfg.output_root = root / "service";
  cfg.workers = 1;
  Service service(cfg);
  const int port = service.start();
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  json body = {{"sketch_png_b64", base64_encode(sketch)}, {"mask_png_b64", nullptr}, {"volume_fraction", 0.2},
               {"load_angle_deg", 270.0}, {"strength", 0.7}, {"backend", "simp"}, {"batch_count", 1},
               {"seed", 7}};
  std::string detail;
  bool ok = true;

  json bad = body;
  bad["volume_fraction"] = 1.5;
  const auto rejected = client.Post("/api/jobs", bad.dump(), "application/json");
  const bool rejected_ok = rejected && rejected->status == 422 && json::parse(rejected->body).at("field") ==
                                                                      "volume_fraction";
  ok &= rejected_ok;

  const auto posted = client.Post("/api/jobs", body.dump(), "application/json");
  json job;
  if (posted && posted->status == 202) {
    const std::string id = json::parse(posted->body).at("job_id");
    for (int k = 0; k < 1200; ++k) {
      const auto res = client.Get("/api/jobs/" + id);
      if (!res) break;
      job = json::parse(res->body);
      if (job.at("state") == "Done" || job.at("state") == "Failed") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
  ok &= job.is_object() && job.value("state", "") == "Done" && job.at("results").size() == 1;

  const int rc = run_cli("solve --sketch '" + (root / "sketch.png").string() + "' --seed 7 --batch 1 --out '" +
                         (root / "cli").string() + "'");
  ok &= rc == 0;
  if (ok) {
    const json cli = read_json(root / "cli" / "reports.json")[0];
    const json& api = job.at("results")[0];
    const bool same_c = api.at("compliance") == cli.at("report").at("compliance");
    const bool same_vf = api.at("vf_global_pct") == cli.at("report").at("vf_global_pct");
    const bool same_png = base64_decode(api.at("structure_png_b64").get<std::string>()) ==
                          read_file(root / "cli" / "structures" / "run_000.png");
    ok &= same_c && same_vf && same_png;
    detail = fmt::format("API compliance {} vs CLI {}, structure PNG identical: {}, invalid vf -> 422: {}",
                         api.at("compliance").dump(), cli.at("report").at("compliance").dump(),
                         same_png ? "yes" : "no", rejected_ok ? "yes" : "no");
  } else {
    detail = fmt::format("job state {}, CLI exit {}, invalid vf -> 422: {}",
                         job.is_object() ? job.value("state", "?") : "missing", rc, rejected_ok ? "yes" : "no");
  }
  service.stop();
  fs::remove_all(root);
  report(ok, "Service conformance (job API vs CLI, same seed)", detail);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  fea_baseline();
  generative_substitute();
  fem_correctness();
  monotonicity();
  codec();
  service_conformance();
  std::cout << fmt::format("{} of 6 criteria failed, {:.1f} s", failures, seconds_since(t0)) << std::endl;
  return failures == 0 ? 0 : 1;
}
