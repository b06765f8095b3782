// topoforge command-line interface: solve, evaluate, render, serve.

#include <cctype>
#include <csignal>
#include <cstdlib>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "topoforge/problem_json.hpp"
#include "topoforge/run.hpp"
#include "topoforge/service.hpp"

namespace {

using namespace topoforge;
namespace fs = std::filesystem;

GridSize parse_grid(const std::string& text) {
  int nx = 0, ny = 0;
  char sep = 0;
  if (std::sscanf(text.c_str(), "%d%c%d", &nx, &sep, &ny) != 3 || (sep != 'x' && sep != 'X') || nx < 1 || ny < 1) {
    throw Error(ErrorCode::InvalidArgument, "grid must look like 64x64, got " + text);
  }
  return {nx, ny};
}

struct CommonFlags {
  double vf = 0.2;
  double load_angle = 270.0;
  std::string grid = "64x64";
  std::optional<std::string> mask;
  double threshold = 0.5;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--vf", f.vf, "Target volume fraction in (0, 1]")->envname("TOPOFORGE_VF");
  cmd->add_option("--load-angle", f.load_angle, "Load direction in degrees, 0 = +x, counter-clockwise")
      ->envname("TOPOFORGE_LOAD_ANGLE");
  cmd->add_option("--grid", f.grid, "Element grid, e.g. 64x64")->envname("TOPOFORGE_GRID");
  cmd->add_option("--mask", f.mask, "Mask PNG; Mask-colored pixels are editable");
  cmd->add_option("--threshold", f.threshold, "Binarization threshold for evaluation")
      ->envname("TOPOFORGE_THRESHOLD");
}

struct SolveFlags {
  CommonFlags common;
  std::string sketch;
  std::optional<std::string> prior;
  double strength = 0.7;
  int batch = 1;
  std::optional<std::uint64_t> seed;
  std::string backend = "simp";
  std::string remote_url;
  double remote_timeout = 120.0;
  std::string out = "runs/solve";
  unsigned threads = 1;
};

PipelineConfig pipeline_config(double threshold, const std::string& remote_url, double remote_timeout,
                               unsigned threads) {
  PipelineConfig cfg;
  cfg.threshold = threshold;
  cfg.remote = {remote_url, remote_timeout};
  cfg.threads = threads;
  return cfg;
}

std::string fmt_compliance(double c) { return std::isfinite(c) ? fmt::format("{:.4f}", c) : "inf"; }

int run_solve(const SolveFlags& f) {
  RunRequest req;
  try {
    req.sketch_png = read_file(f.sketch);
    if (f.common.mask) req.mask_png = read_file(*f.common.mask);
    if (f.prior) req.prior_png = read_file(*f.prior);
    req.grid = parse_grid(f.common.grid);
    const auto backend = backend_from_string(f.backend);
    if (!backend) throw Error(ErrorCode::InvalidArgument, "backend must be simp or remote");
    req.params.backend = *backend;
    req.params.volume_fraction = f.common.vf;
    req.params.load_angle_deg = f.common.load_angle;
    req.params.strength = f.strength;
    req.params.batch_count = f.batch;
    req.params.seed = f.seed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const RunOutcome outcome = execute_run(req, pipeline_config(f.common.threshold, f.remote_url, f.remote_timeout,
                                                                f.threads),
                                           f.out);
    for (const auto& d : outcome.diagnostics) {
      std::cerr << "warning: " << to_string(d.kind) << ": " << d.message << "\n";
    }
    const BatchStats& s = outcome.stats;
    fmt::print("{:>4}  {:>20}  {:>12}  {:>10}  {:>12}  {:>9}  {:>5}\n", "run", "seed", "compliance", "vf_global%",
               "vf_editable%", "converged", "iters");
    for (const auto& r : s.runs) {
      const std::string seed = r.seed ? std::to_string(*r.seed) : "-";
      if (!r.ok) {
        fmt::print("{:>4}  {:>20}  failed: {}\n", r.run_id, seed, r.error);
        continue;
      }
      fmt::print("{:>4}  {:>20}  {:>12}  {:>10.2f}  {:>12.2f}  {:>9}  {:>5}\n", r.run_id, seed,
                 fmt_compliance(r.report.compliance), 100.0 * r.report.vf_global, 100.0 * r.report.vf_editable,
                 r.output.converged ? "yes" : "no", r.output.iterations);
    }
    fmt::print("\ncompliance   {:.4f} ± {:.4f}\n", s.compliance_mean, s.compliance_std);
    fmt::print("volume (%)   {:.2f} ± {:.2f}\n", s.vf_mean_pct, s.vf_std_pct);
    fmt::print("runs         {} of {} succeeded{}\n", s.n, s.requested, s.std_undefined ? " (std undefined for n < 2)" : "");
    fmt::print("run dir      {}\n", fs::absolute(f.out).string());
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
}

struct EvaluateFlags {
  CommonFlags common;
  std::string structure;
  std::optional<std::string> sketch;
  std::optional<std::string> problem;
};

int run_evaluate(const EvaluateFlags& f) {
  try {
    DesignProblem problem;
    if (f.problem) {
      const Bytes raw = read_file(*f.problem);
      const auto j = nlohmann::json::parse(raw.begin(), raw.end(), nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "problem file is not JSON");
      problem = problem_from_json(j);
      if (f.common.mask) problem.mask = parse_mask(decode_png_rgba(read_file(*f.common.mask)), default_palette(), problem.grid);
    } else if (f.sketch) {
      RunRequest req;
      req.sketch_png = read_file(*f.sketch);
      if (f.common.mask) req.mask_png = read_file(*f.common.mask);
      req.grid = parse_grid(f.common.grid);
      req.params.volume_fraction = f.common.vf;
      req.params.load_angle_deg = f.common.load_angle;
      problem = problem_from_request(req);
    } else {
      throw Error(ErrorCode::InvalidArgument, "either --sketch or --problem is required");
    }
    std::vector<std::string> warnings;
    const DensityField field = structure_from_png(read_file(f.structure), problem, default_palette(), &warnings);
    EvaluationReport report = evaluate_structure(field, problem, MaterialParams{}, f.common.threshold);
    report.diagnostics.insert(report.diagnostics.begin(), warnings.begin(), warnings.end());
    std::cout << report_to_json(report).dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

struct RenderFlags {
  std::string problem;
  std::string out;
  std::optional<std::string> size;
};

int run_render(const RenderFlags& f) {
  try {
    const Bytes raw = read_file(f.problem);
    const auto j = nlohmann::json::parse(raw.begin(), raw.end(), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "problem file is not JSON");
    const DesignProblem problem = problem_from_json(j);
    const GridSize size = f.size ? parse_grid(*f.size) : problem.grid;
    write_file(f.out, encode_png(render_problem(problem, default_palette(), size.nelx, size.nely)));
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

struct ServeFlags {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string out = "runs";
  std::optional<std::string> static_root;
  unsigned workers = 0;
  std::string remote_url;
  double remote_timeout = 120.0;
  double threshold = 0.5;
  std::string grid = "64x64";
};

Service* g_service = nullptr;

// CLI11 lets a config file shadow environment variables; drop config entries
// whose TOPOFORGE_* variable is set so the environment wins over the file.
class EnvFirstConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items = CLI::ConfigINI::from_config(input);
    std::erase_if(items, [](const CLI::ConfigItem& item) {
      std::string env = "TOPOFORGE_";
      for (char c : item.name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      const char* value = std::getenv(env.c_str());
      return value != nullptr && *value != '\0';
    });
    return items;
  }
};

int run_serve(const ServeFlags& f) {
  ServiceConfig cfg;
  cfg.host = f.host;
  cfg.port = f.port;
  cfg.output_root = f.out;
  if (f.static_root) cfg.static_root = *f.static_root;
  cfg.workers = f.workers;
  cfg.pipeline = pipeline_config(f.threshold, f.remote_url, f.remote_timeout, 1);
  try {
    cfg.grid = parse_grid(f.grid);
    Service service(cfg);
    g_service = &service;
    std::signal(SIGINT, [](int) { if (g_service) g_service->stop(); });
    std::signal(SIGTERM, [](int) { if (g_service) g_service->stop(); });
    std::cerr << fmt::format("listening on {}:{}\n", f.host, f.port);
    service.run();
    g_service = nullptr;
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch-driven 2D topology optimization"};
  app.set_config("--config", "", "key=value configuration file")->envname("TOPOFORGE_CONFIG");
  app.config_formatter(std::make_shared<EnvFirstConfig>());
  app.require_subcommand(1);

  SolveFlags solve;
  auto* solve_cmd = app.add_subcommand("solve", "Optimize the structure described by a sketch");
  solve_cmd->add_option("--sketch", solve.sketch, "Sketch PNG")->required();
  add_common(solve_cmd, solve.common);
  solve_cmd->add_option("--prior", solve.prior, "Prior structure PNG (grayscale, 255 = solid)");
  solve_cmd->add_option("--strength", solve.strength, "Departure from the prior in [0, 1]")->envname("TOPOFORGE_STRENGTH");
  solve_cmd->add_option("--batch", solve.batch, "Number of generations")->envname("TOPOFORGE_BATCH");
  solve_cmd->add_option("--seed", solve.seed, "Base seed; run k uses seed + k")->envname("TOPOFORGE_SEED");
  solve_cmd->add_option("--backend", solve.backend, "simp or remote")
      ->check(CLI::IsMember({"simp", "remote"}))
      ->envname("TOPOFORGE_BACKEND");
  solve_cmd->add_option("--remote-url", solve.remote_url, "Remote backend base URL")->envname("TOPOFORGE_REMOTE_URL");
  solve_cmd->add_option("--remote-timeout", solve.remote_timeout, "Remote timeout in seconds")
      ->envname("TOPOFORGE_REMOTE_TIMEOUT");
  solve_cmd->add_option("--out", solve.out, "Run directory")->envname("TOPOFORGE_OUT");
  solve_cmd->add_option("--threads", solve.threads, "Parallel batch members (0 = CPU count)")
      ->envname("TOPOFORGE_THREADS");

  EvaluateFlags evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Report compliance and volume fraction of a structure");
  eval_cmd->add_option("--structure", evaluate.structure, "Structure PNG")->required();
  eval_cmd->add_option("--sketch", evaluate.sketch, "Sketch PNG defining the problem");
  eval_cmd->add_option("--problem", evaluate.problem, "Problem JSON (e.g. from a run directory)");
  add_common(eval_cmd, evaluate.common);

  RenderFlags render;
  auto* render_cmd = app.add_subcommand("render", "Rasterize a problem JSON into a sketch PNG");
  render_cmd->add_option("--problem", render.problem, "Problem JSON")->required();
  render_cmd->add_option("--out", render.out, "Output PNG")->required();
  render_cmd->add_option("--size", render.size, "Raster size, defaults to the grid");

  ServeFlags serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API and host the studio");
  serve_cmd->add_option("--host", serve.host, "Bind address")->envname("TOPOFORGE_HOST");
  serve_cmd->add_option("--port", serve.port, "Port")->envname("TOPOFORGE_PORT");
  serve_cmd->add_option("--out", serve.out, "Output root for job artifacts")->envname("TOPOFORGE_OUT");
  serve_cmd->add_option("--static", serve.static_root, "Studio bundle directory")->envname("TOPOFORGE_STATIC");
  serve_cmd->add_option("--workers", serve.workers, "Job workers (0 = CPU count)")->envname("TOPOFORGE_WORKERS");
  serve_cmd->add_option("--remote-url", serve.remote_url, "Remote backend base URL")->envname("TOPOFORGE_REMOTE_URL");
  serve_cmd->add_option("--remote-timeout", serve.remote_timeout, "Remote timeout in seconds")
      ->envname("TOPOFORGE_REMOTE_TIMEOUT");
  serve_cmd->add_option("--grid", serve.grid, "Element grid for submitted sketches")->envname("TOPOFORGE_GRID");
  serve_cmd->add_option("--threshold", serve.threshold, "Binarization threshold")->envname("TOPOFORGE_THRESHOLD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (solve_cmd->parsed()) return run_solve(solve);
  if (eval_cmd->parsed()) return run_evaluate(evaluate);
  if (render_cmd->parsed()) return run_render(render);
  return run_serve(serve);
}
