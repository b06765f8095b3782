#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "topoforge/run.hpp"

namespace topoforge {

enum class JobState { Queued, Running, Done, Failed };

std::string_view to_string(JobState state);

struct JobResult {
  std::string structure_path;  ///< relative to the job's run directory
  EvaluationReport report;
};

struct Job {
  std::string id;
  JobState state = JobState::Queued;
  RunRequest request;
  std::filesystem::path run_dir;
  std::vector<JobResult> results;
  std::chrono::system_clock::time_point created;
  std::optional<std::chrono::system_clock::time_point> finished;
  std::string error;
};

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::filesystem::path output_root = "runs";
  std::optional<std::filesystem::path> static_root;  ///< studio bundle
  unsigned workers = 0;                              ///< 0 = CPU count
  GridSize grid = kDefaultGrid;                      ///< element grid for submitted sketches
  PipelineConfig pipeline;
};

/// Field-level validation failure for an API payload.
struct ValidationFailure {
  std::string field;
  std::string message;
};

/// Parses a POST /api/jobs body; returns the request or the first invalid field.
std::variant<RunRequest, ValidationFailure> parse_job_request(const nlohmann::json& body, GridSize grid);

/// In-process HTTP API; jobs run on a worker pool off the request path.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port
  /// (useful with port 0). Throws Io when the port cannot be bound.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  std::string submit(RunRequest request);
  std::optional<Job> job(const std::string& id) const;
  /// Blocks until the job leaves Queued/Running or the timeout expires.
  std::optional<Job> wait(const std::string& id, std::chrono::milliseconds timeout) const;

  nlohmann::json job_to_json(const Job& job) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace topoforge
