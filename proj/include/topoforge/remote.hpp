#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "topoforge/image_io.hpp"

namespace topoforge {

struct RemoteConfig {
  std::string url;  ///< e.g. http://127.0.0.1:9000 ; /v1/generate is appended
  double timeout_s = 120.0;
};

struct RemoteRequest {
  Bytes sketch_png;
  std::optional<Bytes> mask_png;
  double volume_fraction = 0.2;
  double load_angle_deg = 270.0;
  double strength = 0.7;
  std::optional<std::uint64_t> seed;
};

struct RemoteResponse {
  GrayImage structure;
  std::string backend;
  double duration_ms = 0.0;
};

nlohmann::json remote_request_to_json(const RemoteRequest& request);
/// Throws RemoteProtocolError on missing fields or undecodable images.
RemoteResponse remote_response_from_json(const nlohmann::json& body);

/// POST {url}/v1/generate. Connection failures and non-200 statuses raise
/// BackendUnavailable, expired deadlines raise Timeout.
RemoteResponse remote_generate(const RemoteConfig& config, const RemoteRequest& request);

}  // namespace topoforge
