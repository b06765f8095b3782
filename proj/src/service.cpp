#include "topoforge/service.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <fmt/format.h>

#include "topoforge/problem_json.hpp"

namespace topoforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::Queued: return "Queued";
    case JobState::Running: return "Running";
    case JobState::Done: return "Done";
    case JobState::Failed: return "Failed";
  }
  return "Failed";
}

namespace {

constexpr int kMaxBatch = 1000;

std::optional<Bytes> optional_png(const json& body, const char* field, std::optional<ValidationFailure>& failure) {
  if (!body.contains(field) || body.at(field).is_null()) return std::nullopt;
  if (!body.at(field).is_string()) {
    failure = ValidationFailure{field, "must be a base64 string or null"};
    return std::nullopt;
  }
  try {
    Bytes png = base64_decode(body.at(field).get<std::string>());
    (void)png_has_color(png);
    return png;
  } catch (const Error& e) {
    failure = ValidationFailure{field, e.what()};
    return std::nullopt;
  }
}

std::optional<double> number_field(const json& body, const char* field, std::optional<ValidationFailure>& failure) {
  if (!body.contains(field) || body.at(field).is_null()) return std::nullopt;
  if (!body.at(field).is_number()) {
    failure = ValidationFailure{field, "must be a number"};
    return std::nullopt;
  }
  return body.at(field).get<double>();
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::variant<RunRequest, ValidationFailure> parse_job_request(const json& body, GridSize grid) {
  if (!body.is_object()) return ValidationFailure{"body", "must be a JSON object"};
  std::optional<ValidationFailure> failure;
  RunRequest req;
  req.grid = grid;

  if (!body.contains("sketch_png_b64") || !body.at("sketch_png_b64").is_string()) {
    return ValidationFailure{"sketch_png_b64", "required base64 PNG string"};
  }
  auto sketch = optional_png(body, "sketch_png_b64", failure);
  if (failure) return *failure;
  req.sketch_png = std::move(*sketch);
  req.mask_png = optional_png(body, "mask_png_b64", failure);
  if (failure) return *failure;
  req.prior_png = optional_png(body, "prior_png_b64", failure);
  if (failure) return *failure;

  const auto vf = number_field(body, "volume_fraction", failure);
  if (failure) return *failure;
  if (!vf) return ValidationFailure{"volume_fraction", "required number in (0, 1]"};
  if (!(*vf > 0.0 && *vf <= 1.0)) return ValidationFailure{"volume_fraction", fmt::format("{} is outside (0, 1]", *vf)};
  req.params.volume_fraction = *vf;

  const auto angle = number_field(body, "load_angle_deg", failure);
  if (failure) return *failure;
  if (angle) {
    if (!std::isfinite(*angle)) return ValidationFailure{"load_angle_deg", "must be finite"};
    req.params.load_angle_deg = *angle;
  }

  const auto strength = number_field(body, "strength", failure);
  if (failure) return *failure;
  if (strength) {
    if (!(*strength >= 0.0 && *strength <= 1.0)) {
      return ValidationFailure{"strength", fmt::format("{} is outside [0, 1]", *strength)};
    }
    req.params.strength = *strength;
  }

  if (body.contains("backend") && !body.at("backend").is_null()) {
    const auto backend = body.at("backend").is_string()
                             ? backend_from_string(body.at("backend").get<std::string>())
                             : std::nullopt;
    if (!backend) return ValidationFailure{"backend", "must be \"simp\" or \"remote\""};
    req.params.backend = *backend;
  }

  if (body.contains("batch_count") && !body.at("batch_count").is_null()) {
    const json& b = body.at("batch_count");
    if (!b.is_number_integer() || b.get<long long>() < 1 || b.get<long long>() > kMaxBatch) {
      return ValidationFailure{"batch_count", fmt::format("must be an integer in [1, {}]", kMaxBatch)};
    }
    req.params.batch_count = b.get<int>();
  }

  if (body.contains("seed") && !body.at("seed").is_null()) {
    const json& s = body.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      return ValidationFailure{"seed", "must be a non-negative integer or null"};
    }
    req.params.seed = s.get<std::uint64_t>();
  }
  return req;
}

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread listener;
  std::vector<std::jthread> workers;

  mutable std::mutex mutex;
  mutable std::condition_variable changed;
  std::map<std::string, Job> jobs;
  std::deque<std::string> queue;
  bool stopping = false;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::uint64_t counter = 0;

  explicit Impl(ServiceConfig cfg) : config(std::move(cfg)) {
    unsigned n = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    for (unsigned i = 0; i < n; ++i) workers.emplace_back([this] { work(); });
    routes();
  }

  ~Impl() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
    }
    changed.notify_all();
    workers.clear();
    server.stop();
    if (listener.joinable()) listener.join();
  }

  void work() {
    for (;;) {
      std::string id;
      RunRequest request;
      fs::path run_dir;
      {
        std::unique_lock lock(mutex);
        changed.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        Job& job = jobs.at(id);
        job.state = JobState::Running;
        request = job.request;
        run_dir = job.run_dir;
      }
      changed.notify_all();

      std::vector<JobResult> results;
      std::string error;
      try {
        const RunOutcome outcome = execute_run(request, config.pipeline, run_dir);
        for (std::size_t i = 0; i < outcome.stats.runs.size(); ++i) {
          const RunRecord& r = outcome.stats.runs[i];
          if (r.ok) results.push_back({outcome.structure_files[i], r.report});
        }
      } catch (const std::exception& e) {
        error = e.what();
      }
      {
        std::lock_guard lock(mutex);
        Job& job = jobs.at(id);
        job.results = std::move(results);
        job.finished = std::chrono::system_clock::now();
        if (error.empty() && !job.results.empty()) {
          job.state = JobState::Done;
        } else {
          job.state = JobState::Failed;
          job.error = error.empty() ? "no results" : error;
        }
      }
      changed.notify_all();
    }
  }

  std::string submit(RunRequest request) {
    std::lock_guard lock(mutex);
    std::string id = fmt::format("job-{:06d}-{:016x}", ++counter, id_rng());
    Job job;
    job.id = id;
    job.request = std::move(request);
    job.run_dir = config.output_root / "jobs" / id;
    job.created = std::chrono::system_clock::now();
    jobs.emplace(id, std::move(job));
    queue.push_back(id);
    changed.notify_all();
    return id;
  }

  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void routes() {
    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });
    server.Get("/api/palette", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, palette_to_json(default_palette()));
    });
    server.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        send_json(res, 400, {{"error", "request body is not valid JSON"}, {"field", nullptr}});
        return;
      }
      auto parsed = parse_job_request(body, config.grid);
      if (auto* bad = std::get_if<ValidationFailure>(&parsed)) {
        send_json(res, 422, {{"error", bad->message}, {"field", bad->field}});
        return;
      }
      RunRequest request = std::get<RunRequest>(std::move(parsed));
      try {
        (void)problem_from_request(request);
      } catch (const Error& e) {
        send_json(res, 422, {{"error", e.what()}, {"field", "sketch_png_b64"}});
        return;
      }
      const std::string id = submit(std::move(request));
      send_json(res, 202, {{"job_id", id}});
    });
    server.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto job = lookup(req.matches[1]);
      if (!job) {
        send_json(res, 404, {{"error", "unknown job"}});
        return;
      }
      send_json(res, 200, to_json(*job));
    });
    if (config.static_root) server.set_mount_point("/", config.static_root->string());
  }

  std::optional<Job> lookup(const std::string& id) const {
    std::lock_guard lock(mutex);
    const auto it = jobs.find(id);
    if (it == jobs.end()) return std::nullopt;
    return it->second;
  }

  json to_json(const Job& job) const {
    json results = json::array();
    for (const auto& r : job.results) {
      std::string b64;
      try {
        b64 = base64_encode(read_file(job.run_dir / r.structure_path));
      } catch (const Error&) {
      }
      results.push_back({{"structure_png_b64", b64},
                         {"compliance", compliance_to_json(r.report.compliance)},
                         {"vf_global_pct", 100.0 * r.report.vf_global},
                         {"vf_editable_pct", 100.0 * r.report.vf_editable}});
    }
    return {
        {"job_id", job.id},
        {"state", std::string(topoforge::to_string(job.state))},
        {"results", results},
        {"error", job.error.empty() ? json(nullptr) : json(job.error)},
        {"created", iso_time(job.created)},
        {"finished", job.finished ? json(iso_time(*job.finished)) : json(nullptr)},
    };
  }

  int bind() {
    fs::create_directories(config.output_root);
    if (config.port == 0) {
      const int port = server.bind_to_any_port(config.host);
      if (port < 0) throw Error(ErrorCode::Io, "cannot bind any port on " + config.host);
      return port;
    }
    if (!server.bind_to_port(config.host, config.port)) {
      throw Error(ErrorCode::Io, fmt::format("cannot bind {}:{}", config.host, config.port));
    }
    return config.port;
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() = default;

int Service::start() {
  const int port = impl_->bind();
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void Service::stop() { impl_->server.stop(); }

std::string Service::submit(RunRequest request) { return impl_->submit(std::move(request)); }

std::optional<Job> Service::job(const std::string& id) const { return impl_->lookup(id); }

std::optional<Job> Service::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->mutex);
  const auto done = [&] {
    const auto it = impl_->jobs.find(id);
    return it == impl_->jobs.end() || it->second.state == JobState::Done || it->second.state == JobState::Failed;
  };
  impl_->changed.wait_for(lock, timeout, done);
  const auto it = impl_->jobs.find(id);
  if (it == impl_->jobs.end()) return std::nullopt;
  return it->second;
}

json Service::job_to_json(const Job& job) const { return impl_->to_json(job); }

}  // namespace topoforge
