#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topoforge/grid.hpp"
#include "topoforge/mesh.hpp"

namespace topoforge {

enum class Role : std::uint8_t { Material, Load, FixX, FixY, FixXY, Mask, Background };

inline constexpr std::array<Role, 7> kAllRoles{Role::Material, Role::Load,  Role::FixX,      Role::FixY,
                                               Role::FixXY,    Role::Mask,  Role::Background};

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

struct ColorCode {
  Role role = Role::Background;
  Rgba color;
  int tolerance = 30;
  /// Compare on RGB only (the mask brush is drawn semi-transparent).
  bool ignore_alpha = false;
};

using Palette = std::vector<ColorCode>;

/// Brush colors used by the studio and the sketch parser.
Palette default_palette();

/// Throws AmbiguousPalette if two codes can both accept some color, or
/// InvalidArgument if a role is missing.
void check_palette(const Palette& palette);

/// Classifies one pixel; Background when no code is within tolerance.
Role classify(const Rgba& px, const Palette& palette);

/// RGBA raster, row-major, row 0 at the top of the image.
struct RasterSketch {
  int width = 0;
  int height = 0;
  std::vector<Rgba> pixels;

  RasterSketch() = default;
  RasterSketch(int w, int h, Rgba fill = {255, 255, 255, 255});

  Rgba& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  const Rgba& at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

struct PointLoad {
  Point2 position;
  double magnitude = 1.0;
  double angle_deg = 270.0;  ///< 0 = +x, counter-clockwise
};

enum class FixKind : std::uint8_t { FixX, FixY, FixXY };

std::string_view to_string(FixKind kind);
std::optional<FixKind> fix_kind_from_string(std::string_view name);

struct Fixing {
  Point2 position;
  FixKind kind = FixKind::FixXY;
};

struct DesignProblem {
  GridSize grid;
  BoolGrid domain;  ///< true = designable material region
  std::vector<PointLoad> loads;
  std::vector<Fixing> fixings;
  double volume_fraction = 0.5;
  std::optional<BoolGrid> mask;  ///< true = editable

  /// Elements the optimizer may change: the mask when present, otherwise the domain.
  BoolGrid active_set() const;
};

/// Throws InvalidArgument if a structural invariant of DesignProblem is violated.
void check_problem(const DesignProblem& problem);

struct ParseParams {
  double load_angle_deg = 270.0;
  double volume_fraction = 0.5;
  double load_magnitude = 1.0;
  /// Element grid; defaults to one element per sketch pixel.
  std::optional<GridSize> grid;
};

DesignProblem parse_sketch(const RasterSketch& sketch, const Palette& palette, const ParseParams& params);

/// Editable-element layer from the Mask-colored pixels of a separate mask image.
BoolGrid parse_mask(const RasterSketch& mask_image, const Palette& palette, GridSize grid);

/// Paints domain, then mask, then constraints, one pixel per element when
/// size equals the grid.
RasterSketch render_problem(const DesignProblem& problem, const Palette& palette, int width, int height);

/// Mask-only layer on a transparent background, one pixel per element.
RasterSketch render_mask(const DesignProblem& problem, const Palette& palette);

enum class Severity : std::uint8_t { Warning, Error };

enum class DiagnosticKind : std::uint8_t {
  OutOfBounds,
  LoadOutsideDomain,
  FixingOutsideDomain,
  SingularRisk,
  MaskNotSubset,
  MissingLoad,
  MissingFixing,
  InvalidVolumeFraction,
};

std::string_view to_string(DiagnosticKind kind);

struct Diagnostic {
  Severity severity = Severity::Warning;
  DiagnosticKind kind = DiagnosticKind::OutOfBounds;
  std::string message;
};

std::vector<Diagnostic> validate_problem(const DesignProblem& problem);

bool has_errors(std::span<const Diagnostic> diagnostics);

}  // namespace topoforge
