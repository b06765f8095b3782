#include "topoforge/problem_json.hpp"

#include "topoforge/error.hpp"

namespace topoforge {

using nlohmann::json;

namespace {

json runs_to_json(const BoolGrid& bits) {
  json out = json::array();
  for (const auto& [start, count] : rle_encode(bits)) out.push_back({start, count});
  return out;
}

BoolGrid runs_from_json(const json& j, std::size_t size) {
  RleRuns runs;
  for (const auto& run : j) {
    if (!run.is_array() || run.size() != 2) throw Error(ErrorCode::InvalidArgument, "RLE run must be [start, count]");
    runs.emplace_back(run[0].get<std::size_t>(), run[1].get<std::size_t>());
  }
  return rle_decode(runs, size);
}

}  // namespace

json problem_to_json(const DesignProblem& problem) {
  json loads = json::array();
  for (const auto& l : problem.loads) {
    loads.push_back({{"x", l.position.x}, {"y", l.position.y}, {"magnitude", l.magnitude}, {"angle_deg", l.angle_deg}});
  }
  json fixings = json::array();
  for (const auto& f : problem.fixings) {
    fixings.push_back({{"x", f.position.x}, {"y", f.position.y}, {"kind", std::string(to_string(f.kind))}});
  }
  return {
      {"grid", {{"nelx", problem.grid.nelx}, {"nely", problem.grid.nely}}},
      {"domain", runs_to_json(problem.domain)},
      {"loads", loads},
      {"fixings", fixings},
      {"volume_fraction", problem.volume_fraction},
      {"mask", problem.mask ? runs_to_json(*problem.mask) : json(nullptr)},
  };
}

DesignProblem problem_from_json(const json& j) {
  try {
    DesignProblem p;
    p.grid = {j.at("grid").at("nelx").get<int>(), j.at("grid").at("nely").get<int>()};
    if (p.grid.nelx < 1 || p.grid.nely < 1) throw Error(ErrorCode::InvalidArgument, "grid must be positive");
    p.domain = runs_from_json(j.at("domain"), p.grid.elements());
    for (const auto& l : j.at("loads")) {
      p.loads.push_back({{l.at("x").get<double>(), l.at("y").get<double>()}, l.value("magnitude", 1.0),
                         l.value("angle_deg", 270.0)});
    }
    for (const auto& f : j.at("fixings")) {
      const auto kind = fix_kind_from_string(f.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown fixing kind " + f.at("kind").dump());
      p.fixings.push_back({{f.at("x").get<double>(), f.at("y").get<double>()}, *kind});
    }
    p.volume_fraction = j.at("volume_fraction").get<double>();
    if (j.contains("mask") && !j.at("mask").is_null()) p.mask = runs_from_json(j.at("mask"), p.grid.elements());
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed problem JSON: ") + e.what());
  }
}

json palette_to_json(const Palette& palette) {
  json out = json::array();
  for (const auto& c : palette) {
    out.push_back({{"role", std::string(to_string(c.role))},
                   {"color", {c.color.r, c.color.g, c.color.b, c.color.a}},
                   {"tolerance", c.tolerance},
                   {"ignore_alpha", c.ignore_alpha}});
  }
  return out;
}

json density_to_json(const DensityField& field) {
  return {{"nelx", field.grid.nelx}, {"nely", field.grid.nely}, {"rho", field.rho}};
}

}  // namespace topoforge
