#include "topoforge/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "topoforge/error.hpp"

namespace topoforge {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Material: return "Material";
    case Role::Load: return "Load";
    case Role::FixX: return "FixX";
    case Role::FixY: return "FixY";
    case Role::FixXY: return "FixXY";
    case Role::Mask: return "Mask";
    case Role::Background: return "Background";
  }
  return "Background";
}

std::optional<Role> role_from_string(std::string_view name) {
  for (Role r : kAllRoles) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

std::string_view to_string(FixKind kind) {
  switch (kind) {
    case FixKind::FixX: return "FixX";
    case FixKind::FixY: return "FixY";
    case FixKind::FixXY: return "FixXY";
  }
  return "FixXY";
}

std::optional<FixKind> fix_kind_from_string(std::string_view name) {
  for (FixKind k : {FixKind::FixX, FixKind::FixY, FixKind::FixXY}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::OutOfBounds: return "OutOfBounds";
    case DiagnosticKind::LoadOutsideDomain: return "LoadOutsideDomain";
    case DiagnosticKind::FixingOutsideDomain: return "FixingOutsideDomain";
    case DiagnosticKind::SingularRisk: return "SingularRisk";
    case DiagnosticKind::MaskNotSubset: return "MaskNotSubset";
    case DiagnosticKind::MissingLoad: return "MissingLoad";
    case DiagnosticKind::MissingFixing: return "MissingFixing";
    case DiagnosticKind::InvalidVolumeFraction: return "InvalidVolumeFraction";
  }
  return "Unknown";
}

Palette default_palette() {
  return {
      {Role::Material, {0, 0, 0, 255}, 30, false},
      {Role::Load, {255, 0, 0, 255}, 30, false},
      {Role::FixX, {255, 255, 0, 255}, 30, false},
      {Role::FixY, {0, 0, 255, 255}, 30, false},
      {Role::FixXY, {0, 255, 0, 255}, 30, false},
      {Role::Mask, {0, 127, 255, 128}, 30, true},
      {Role::Background, {255, 255, 255, 255}, 30, false},
  };
}

namespace {

int channel_gap(const ColorCode& a, const ColorCode& b) {
  int gap = std::max({std::abs(a.color.r - b.color.r), std::abs(a.color.g - b.color.g),
                      std::abs(a.color.b - b.color.b)});
  if (!a.ignore_alpha && !b.ignore_alpha) gap = std::max(gap, std::abs(a.color.a - b.color.a));
  return gap;
}

int deviation(const Rgba& px, const ColorCode& code) {
  int dev = std::max({std::abs(px.r - code.color.r), std::abs(px.g - code.color.g),
                      std::abs(px.b - code.color.b)});
  if (!code.ignore_alpha) dev = std::max(dev, std::abs(px.a - code.color.a));
  return dev;
}

const ColorCode& code_for(const Palette& palette, Role role) {
  for (const auto& c : palette) {
    if (c.role == role) return c;
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("palette has no {} entry", to_string(role)));
}

bool is_fix(Role r) { return r == Role::FixX || r == Role::FixY || r == Role::FixXY; }

FixKind fix_kind_of(Role r) {
  if (r == Role::FixX) return FixKind::FixX;
  if (r == Role::FixY) return FixKind::FixY;
  return FixKind::FixXY;
}

Role role_of(FixKind k) {
  if (k == FixKind::FixX) return Role::FixX;
  if (k == FixKind::FixY) return Role::FixY;
  return Role::FixXY;
}

Point2 pixel_center(int row, int col, int width, int height) {
  return {(col + 0.5) / width, 1.0 - (row + 0.5) / height};
}

// Inverse of the half-pixel tie rule in nearest_node: the pixel whose centre
// snaps back onto the node lying at raster coordinate `coord`.
int pixel_for_node_axis(double coord, int cells) {
  const int idx = coord < 0.5 * cells ? static_cast<int>(std::floor(coord))
                                      : static_cast<int>(std::ceil(coord)) - 1;
  return std::clamp(idx, 0, cells - 1);
}

int pixel_containing(double coord, int cells) {
  return std::clamp(static_cast<int>(std::floor(coord)), 0, cells - 1);
}

void check_sketch(const RasterSketch& sketch) {
  if (sketch.width < 2 || sketch.height < 2) {
    throw Error(ErrorCode::InvalidArgument, "sketch must be at least 2x2 pixels");
  }
  if (sketch.pixels.size() != static_cast<std::size_t>(sketch.width) * sketch.height) {
    throw Error(ErrorCode::DimensionMismatch, "pixel count does not match sketch dimensions");
  }
}

std::vector<Role> classify_all(const RasterSketch& sketch, const Palette& palette) {
  std::vector<Role> roles(sketch.pixels.size());
  std::transform(sketch.pixels.begin(), sketch.pixels.end(), roles.begin(),
                 [&](const Rgba& px) { return classify(px, palette); });
  return roles;
}

}  // namespace

void check_palette(const Palette& palette) {
  for (Role r : kAllRoles) {
    const auto n = std::count_if(palette.begin(), palette.end(), [r](const ColorCode& c) { return c.role == r; });
    if (n != 1) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("palette needs exactly one {} entry", to_string(r)));
    }
  }
  for (std::size_t i = 0; i < palette.size(); ++i) {
    if (palette[i].tolerance < 0 || palette[i].tolerance > 255) {
      throw Error(ErrorCode::InvalidArgument, "palette tolerance must be in [0, 255]");
    }
    for (std::size_t j = i + 1; j < palette.size(); ++j) {
      if (channel_gap(palette[i], palette[j]) <= palette[i].tolerance + palette[j].tolerance) {
        throw Error(ErrorCode::AmbiguousPalette,
                    fmt::format("{} and {} overlap within tolerance", to_string(palette[i].role),
                                to_string(palette[j].role)));
      }
    }
  }
}

Role classify(const Rgba& px, const Palette& palette) {
  Role best = Role::Background;
  int best_dev = 256;
  for (const auto& code : palette) {
    const int dev = deviation(px, code);
    if (dev <= code.tolerance && dev < best_dev) {
      best = code.role;
      best_dev = dev;
    }
  }
  return best;
}

RasterSketch::RasterSketch(int w, int h, Rgba fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

BoolGrid DesignProblem::active_set() const { return mask ? *mask : domain; }

void check_problem(const DesignProblem& problem) {
  if (problem.grid.nelx < 1 || problem.grid.nely < 1) {
    throw Error(ErrorCode::InvalidArgument, "grid must have at least one element per axis");
  }
  if (problem.domain.size() != problem.grid.elements()) {
    throw Error(ErrorCode::DimensionMismatch, "domain size does not match grid");
  }
  if (problem.mask && problem.mask->size() != problem.grid.elements()) {
    throw Error(ErrorCode::DimensionMismatch, "mask size does not match grid");
  }
  if (!(problem.volume_fraction > 0.0 && problem.volume_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "volume_fraction must lie in (0, 1]");
  }
  if (problem.loads.empty()) throw Error(ErrorCode::NoLoad, "problem has no loads");
  if (problem.fixings.empty()) throw Error(ErrorCode::NoFixing, "problem has no fixings");
}

DesignProblem parse_sketch(const RasterSketch& sketch, const Palette& palette, const ParseParams& params) {
  check_sketch(sketch);
  check_palette(palette);
  const int w = sketch.width;
  const int h = sketch.height;
  const std::vector<Role> roles = classify_all(sketch, palette);

  // Constraint and mask strokes sit on top of material, so they count as domain.
  BoolGrid domain_px(roles.size(), 0);
  BoolGrid mask_px(roles.size(), 0);
  bool any_material = false;
  bool any_mask = false;
  for (std::size_t k = 0; k < roles.size(); ++k) {
    domain_px[k] = roles[k] != Role::Background;
    mask_px[k] = roles[k] == Role::Mask;
    any_material |= roles[k] == Role::Material;
    any_mask |= roles[k] == Role::Mask;
  }
  if (!any_material) throw Error(ErrorCode::NoMaterial, "sketch contains no material pixels");

  DesignProblem problem;
  problem.grid = params.grid.value_or(GridSize{w, h});
  if (problem.grid.nelx < 1 || problem.grid.nely < 1) {
    throw Error(ErrorCode::InvalidArgument, "grid must have at least one element per axis");
  }
  problem.domain = resample_nearest(domain_px, w, h, problem.grid.nelx, problem.grid.nely);
  if (any_mask) problem.mask = resample_nearest(mask_px, w, h, problem.grid.nelx, problem.grid.nely);
  problem.volume_fraction = params.volume_fraction;

  // Load clusters, 4-connected.
  std::vector<std::uint8_t> seen(roles.size(), 0);
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      const std::size_t k0 = static_cast<std::size_t>(r0) * w + c0;
      if (roles[k0] != Role::Load || seen[k0]) continue;
      double sx = 0.0, sy = 0.0;
      std::size_t n = 0;
      std::queue<std::pair<int, int>> frontier;
      frontier.emplace(r0, c0);
      seen[k0] = 1;
      while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop();
        const Point2 p = pixel_center(r, c, w, h);
        sx += p.x;
        sy += p.y;
        ++n;
        constexpr int dr[] = {-1, 1, 0, 0};
        constexpr int dc[] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const int rr = r + dr[d], cc = c + dc[d];
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const std::size_t kk = static_cast<std::size_t>(rr) * w + cc;
          if (roles[kk] == Role::Load && !seen[kk]) {
            seen[kk] = 1;
            frontier.emplace(rr, cc);
          }
        }
      }
      problem.loads.push_back({{sx / n, sy / n}, params.load_magnitude, params.load_angle_deg});
    }
  }

  std::set<std::tuple<int, int, int>> fixed_nodes;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Role role = roles[static_cast<std::size_t>(r) * w + c];
      if (!is_fix(role)) continue;
      const auto [i, j] = nearest_node(problem.grid, pixel_center(r, c, w, h));
      const FixKind kind = fix_kind_of(role);
      if (fixed_nodes.emplace(j, i, static_cast<int>(kind)).second) {
        problem.fixings.push_back({node_position(problem.grid, i, j), kind});
      }
    }
  }

  if (problem.loads.empty()) throw Error(ErrorCode::NoLoad, "sketch contains no load pixels");
  if (problem.fixings.empty()) throw Error(ErrorCode::NoFixing, "sketch contains no fixing pixels");
  return problem;
}

BoolGrid parse_mask(const RasterSketch& mask_image, const Palette& palette, GridSize grid) {
  check_sketch(mask_image);
  check_palette(palette);
  const std::vector<Role> roles = classify_all(mask_image, palette);
  BoolGrid px(roles.size(), 0);
  for (std::size_t k = 0; k < roles.size(); ++k) px[k] = roles[k] == Role::Mask;
  return resample_nearest(px, mask_image.width, mask_image.height, grid.nelx, grid.nely);
}

RasterSketch render_problem(const DesignProblem& problem, const Palette& palette, int width, int height) {
  check_problem(problem);
  if (width < 2 || height < 2) throw Error(ErrorCode::InvalidArgument, "render size must be at least 2x2");
  RasterSketch out(width, height, code_for(palette, Role::Background).color);
  const GridSize& g = problem.grid;

  const BoolGrid domain_px = resample_nearest(problem.domain, g.nelx, g.nely, width, height);
  const Rgba material = code_for(palette, Role::Material).color;
  for (std::size_t k = 0; k < domain_px.size(); ++k) {
    if (domain_px[k]) out.pixels[k] = material;
  }
  if (problem.mask) {
    const BoolGrid mask_px = resample_nearest(*problem.mask, g.nelx, g.nely, width, height);
    const Rgba mask = code_for(palette, Role::Mask).color;
    for (std::size_t k = 0; k < mask_px.size(); ++k) {
      if (mask_px[k]) out.pixels[k] = mask;
    }
  }
  for (const auto& fixing : problem.fixings) {
    const auto [i, j] = nearest_node(g, fixing.position);
    const Point2 node = node_position(g, i, j);
    const int col = pixel_for_node_axis(node.x * width, width);
    const int level = pixel_for_node_axis(node.y * height, height);
    out.at(height - 1 - level, col) = code_for(palette, role_of(fixing.kind)).color;
  }
  const Rgba load = code_for(palette, Role::Load).color;
  for (const auto& l : problem.loads) {
    const int col = pixel_containing(l.position.x * width, width);
    const int level = pixel_containing(l.position.y * height, height);
    out.at(height - 1 - level, col) = load;
  }
  return out;
}

RasterSketch render_mask(const DesignProblem& problem, const Palette& palette) {
  RasterSketch out(problem.grid.nelx, problem.grid.nely, Rgba{0, 0, 0, 0});
  if (!problem.mask) return out;
  const Rgba mask = code_for(palette, Role::Mask).color;
  for (std::size_t k = 0; k < problem.mask->size(); ++k) {
    if ((*problem.mask)[k]) out.pixels[k] = mask;
  }
  return out;
}

std::vector<Diagnostic> validate_problem(const DesignProblem& problem) {
  std::vector<Diagnostic> out;
  auto add = [&out](Severity s, DiagnosticKind k, std::string msg) { out.push_back({s, k, std::move(msg)}); };
  const GridSize& g = problem.grid;

  if (!(problem.volume_fraction > 0.0 && problem.volume_fraction <= 1.0)) {
    add(Severity::Error, DiagnosticKind::InvalidVolumeFraction,
        fmt::format("volume fraction {} outside (0, 1]", problem.volume_fraction));
  }
  if (problem.loads.empty()) add(Severity::Error, DiagnosticKind::MissingLoad, "no loads");
  if (problem.fixings.empty()) add(Severity::Error, DiagnosticKind::MissingFixing, "no fixings");
  if (g.nelx < 1 || g.nely < 1 || problem.domain.size() != g.elements()) {
    add(Severity::Error, DiagnosticKind::OutOfBounds, "domain does not match grid dimensions");
    return out;
  }

  auto inside_unit = [](Point2 p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; };

  if (problem.mask) {
    if (problem.mask->size() != g.elements()) {
      add(Severity::Error, DiagnosticKind::MaskNotSubset, "mask does not match grid dimensions");
    } else {
      std::size_t stray = 0;
      for (std::size_t e = 0; e < g.elements(); ++e) stray += (*problem.mask)[e] && !problem.domain[e];
      if (stray > 0) {
        add(Severity::Error, DiagnosticKind::MaskNotSubset,
            fmt::format("{} mask elements lie outside the domain", stray));
      }
    }
  }

  const std::vector<int> comp = node_components(g, problem.domain);

  // Per component: distinct fixed nodes constraining x and y.
  std::set<std::pair<int, std::size_t>> fixed_x, fixed_y;
  for (std::size_t f = 0; f < problem.fixings.size(); ++f) {
    const auto& fixing = problem.fixings[f];
    if (!inside_unit(fixing.position)) {
      add(Severity::Error, DiagnosticKind::OutOfBounds,
          fmt::format("fixing {} at ({}, {}) lies outside the unit square", f, fixing.position.x, fixing.position.y));
      continue;
    }
    const auto [i, j] = nearest_node(g, fixing.position);
    const std::size_t node = g.node(i, j);
    if (comp[node] < 0) {
      add(Severity::Warning, DiagnosticKind::FixingOutsideDomain,
          fmt::format("fixing {} at ({}, {}) does not touch the domain", f, fixing.position.x, fixing.position.y));
      continue;
    }
    if (fixing.kind != FixKind::FixY) fixed_x.emplace(comp[node], node);
    if (fixing.kind != FixKind::FixX) fixed_y.emplace(comp[node], node);
  }

  std::set<int> flagged;
  for (std::size_t l = 0; l < problem.loads.size(); ++l) {
    const Point2 p = problem.loads[l].position;
    if (!inside_unit(p)) {
      add(Severity::Error, DiagnosticKind::OutOfBounds,
          fmt::format("load {} at ({}, {}) lies outside the unit square", l, p.x, p.y));
      continue;
    }
    const auto [row, col] = containing_element(g, p);
    if (!problem.domain[g.element(row, col)]) {
      add(Severity::Warning, DiagnosticKind::LoadOutsideDomain,
          fmt::format("load {} at ({}, {}) lies outside the domain", l, p.x, p.y));
      continue;
    }
    const int c = comp[g.element_nodes(row, col)[0]];
    auto count = [c](const auto& s) {
      return std::count_if(s.begin(), s.end(), [c](const auto& e) { return e.first == c; });
    };
    const auto nx = count(fixed_x);
    const auto ny = count(fixed_y);
    if ((nx == 0 || ny == 0 || nx + ny < 3) && flagged.insert(c).second) {
      add(Severity::Warning, DiagnosticKind::SingularRisk,
          fmt::format("load {} sits on a domain component without enough fixings to prevent rigid motion", l));
    }
  }
  return out;
}

bool has_errors(std::span<const Diagnostic> diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

}  // namespace topoforge
