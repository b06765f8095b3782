#include "topoforge/remote.hpp"

#include <cmath>

#include <httplib.h>
#include <fmt/format.h>

#include "topoforge/error.hpp"

namespace topoforge {

using nlohmann::json;

json remote_request_to_json(const RemoteRequest& request) {
  return {
      {"sketch_png_b64", base64_encode(request.sketch_png)},
      {"mask_png_b64", request.mask_png ? json(base64_encode(*request.mask_png)) : json(nullptr)},
      {"volume_fraction", request.volume_fraction},
      {"load_angle_deg", request.load_angle_deg},
      {"strength", request.strength},
      {"seed", request.seed ? json(*request.seed) : json(nullptr)},
  };
}

RemoteResponse remote_response_from_json(const json& body) {
  RemoteResponse out;
  try {
    const Bytes png = base64_decode(body.at("structure_png_b64").get<std::string>());
    out.structure = decode_png_gray(png);
    if (body.contains("meta") && body.at("meta").is_object()) {
      const json& meta = body.at("meta");
      out.backend = meta.value("backend", std::string{});
      out.duration_ms = meta.value("duration_ms", 0.0);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::RemoteProtocolError, std::string("malformed response: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::RemoteProtocolError, std::string("undecodable structure image: ") + e.what());
  }
  if (out.structure.width < 1 || out.structure.height < 1) {
    throw Error(ErrorCode::RemoteProtocolError, "structure image is empty");
  }
  return out;
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "remote URL must include a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  Endpoint ep;
  ep.origin = url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  ep.path = prefix + "/v1/generate";
  return ep;
}

}  // namespace

RemoteResponse remote_generate(const RemoteConfig& config, const RemoteRequest& request) {
  if (config.url.empty()) throw Error(ErrorCode::BackendUnavailable, "no remote URL configured");
  const Endpoint ep = split_url(config.url);
  httplib::Client client(ep.origin);
  const auto secs = static_cast<time_t>(std::floor(config.timeout_s));
  const auto usecs = static_cast<time_t>((config.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const auto res = client.Post(ep.path, remote_request_to_json(request).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::Timeout, fmt::format("remote backend did not answer within {} s", config.timeout_s));
    }
    throw Error(ErrorCode::BackendUnavailable, fmt::format("cannot reach {}: {}", config.url, httplib::to_string(err)));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable, fmt::format("remote backend answered HTTP {}", res->status));
  }
  const json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw Error(ErrorCode::RemoteProtocolError, "response body is not a JSON object");
  }
  return remote_response_from_json(body);
}

}  // namespace topoforge
