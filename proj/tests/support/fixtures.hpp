#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <queue>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topoforge/error.hpp"
#include "topoforge/fem.hpp"
#include "topoforge/problem.hpp"

namespace fixtures {

using namespace topoforge;

// Point load near the top-right corner, two pinned supports on the lower-left borders.
inline DesignProblem corner_bracket(GridSize grid = {64, 64}) {
  DesignProblem p;
  p.grid = grid;
  p.domain.assign(grid.elements(), 1);
  p.loads = {{{0.98, 0.96}, 1.0, 270.0}};
  p.fixings = {{{0.26, 0.0}, FixKind::FixXY}, {{0.0, 0.62}, FixKind::FixXY}};
  p.volume_fraction = 0.2;
  return p;
}

// Left edge clamped, downward load at the middle of the right edge.
inline DesignProblem cantilever(GridSize grid) {
  DesignProblem p;
  p.grid = grid;
  p.domain.assign(grid.elements(), 1);
  for (int j = 0; j <= grid.nely; ++j) {
    p.fixings.push_back({{0.0, static_cast<double>(j) / grid.nely}, FixKind::FixXY});
  }
  p.loads = {{{1.0, 0.5}, 1.0, 270.0}};
  p.volume_fraction = 0.4;
  return p;
}

// The corner bracket as a studio sketch, one pixel per element.
inline RasterSketch corner_bracket_sketch(int size = 64) {
  return render_problem(corner_bracket({size, size}), default_palette(), size, size);
}

inline double rand_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int rand_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Point2 pixel_centre(GridSize g, int row, int col) {
  return {(col + 0.5) / g.nelx, 1.0 - (row + 0.5) / g.nely};
}

// Random problem whose constraints sit on distinct, non-adjacent domain
// pixels outside the mask, so render -> parse must reproduce it.
inline DesignProblem random_problem(std::mt19937_64& rng, int min_side = 6, int max_side = 24) {
  DesignProblem p;
  p.grid = {rand_int(rng, min_side, max_side), rand_int(rng, min_side, max_side)};
  const GridSize g = p.grid;
  p.domain.assign(g.elements(), 0);
  const int rects = rand_int(rng, 1, 3);
  for (int k = 0; k < rects; ++k) {
    const int r0 = rand_int(rng, 0, g.nely - 2), c0 = rand_int(rng, 0, g.nelx - 2);
    const int r1 = rand_int(rng, r0 + 1, g.nely - 1), c1 = rand_int(rng, c0 + 1, g.nelx - 1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) p.domain[g.element(r, c)] = 1;
  }
  p.volume_fraction = rand_uniform(rng, 0.1, 0.9);

  BoolGrid mask(g.elements(), 0);
  const bool with_mask = rng() % 2 == 0;
  if (with_mask) {
    const int r0 = rand_int(rng, 0, g.nely - 1), c0 = rand_int(rng, 0, g.nelx - 1);
    const int r1 = rand_int(rng, r0, g.nely - 1), c1 = rand_int(rng, c0, g.nelx - 1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) mask[g.element(r, c)] = p.domain[g.element(r, c)];
  }

  std::vector<std::size_t> free;
  for (std::size_t e = 0; e < g.elements(); ++e)
    if (p.domain[e] && !mask[e]) free.push_back(e);
  std::shuffle(free.begin(), free.end(), rng);

  std::vector<std::size_t> used;
  auto clear_of = [&](std::size_t e) {
    const int r = static_cast<int>(e) / g.nelx, c = static_cast<int>(e) % g.nelx;
    for (std::size_t u : used) {
      const int ur = static_cast<int>(u) / g.nelx, uc = static_cast<int>(u) % g.nelx;
      if (std::abs(ur - r) + std::abs(uc - c) <= 1) return false;
    }
    return true;
  };
  std::vector<std::pair<int, int>> fixed_nodes;
  const int nloads = rand_int(rng, 1, 3), nfix = rand_int(rng, 1, 4);
  const double angle = rand_uniform(rng, 0.0, 360.0);
  for (std::size_t e : free) {
    const bool want_load = static_cast<int>(p.loads.size()) < nloads;
    const bool want_fix = static_cast<int>(p.fixings.size()) < nfix;
    if (!want_load && !want_fix) break;
    if (!clear_of(e)) continue;
    const Point2 c = pixel_centre(g, static_cast<int>(e) / g.nelx, static_cast<int>(e) % g.nelx);
    if (want_load && (!want_fix || rng() % 2 == 0)) {
      p.loads.push_back({c, 1.0, angle});
    } else {
      const auto node = nearest_node(g, c);
      if (std::find(fixed_nodes.begin(), fixed_nodes.end(), node) != fixed_nodes.end()) continue;
      fixed_nodes.push_back(node);
      const FixKind kinds[] = {FixKind::FixX, FixKind::FixY, FixKind::FixXY};
      p.fixings.push_back({node_position(g, node.first, node.second), kinds[rng() % 3]});
    }
    used.push_back(e);
  }
  // Guarantee at least one of each on tiny domains.
  if (p.loads.empty() || p.fixings.empty()) return random_problem(rng, min_side, max_side);
  for (std::size_t e = 0; e < g.elements(); ++e)
    if (std::find(used.begin(), used.end(), e) != used.end()) mask[e] = 0;
  if (with_mask && std::any_of(mask.begin(), mask.end(), [](auto v) { return v != 0; })) p.mask = mask;
  return p;
}

// Fully supported version: whole rectangle, left edge clamped, random load(s).
inline DesignProblem random_supported_problem(std::mt19937_64& rng, int min_side = 4, int max_side = 16) {
  DesignProblem p = cantilever({rand_int(rng, min_side, max_side), rand_int(rng, min_side, max_side)});
  p.loads.clear();
  const int n = rand_int(rng, 1, 3);
  for (int k = 0; k < n; ++k) {
    p.loads.push_back({{rand_uniform(rng, 0.3, 1.0), rand_uniform(rng, 0.0, 1.0)},
                       rand_uniform(rng, 0.5, 2.0), rand_uniform(rng, 0.0, 360.0)});
  }
  return p;
}

inline DensityField random_field(const DesignProblem& p, std::mt19937_64& rng, double lo = 0.05, double hi = 1.0) {
  DensityField f = DensityField::uniform(p, 0.0);
  for (std::size_t e = 0; e < f.rho.size(); ++e)
    if (p.domain[e]) f.rho[e] = rand_uniform(rng, lo, hi);
  return f;
}

// Plane-stress Q4 stiffness by 2x2 Gauss quadrature, unit square, unit E.
inline Eigen::Matrix<double, 8, 8> quadrature_stiffness(double nu) {
  Eigen::Matrix3d D;
  D << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  D /= 1 - nu * nu;
  const double xi_n[4] = {-1, 1, 1, -1};
  const double eta_n[4] = {-1, -1, 1, 1};
  const double gp = 1.0 / std::sqrt(3.0);
  Eigen::Matrix<double, 8, 8> K = Eigen::Matrix<double, 8, 8>::Zero();
  for (double xi : {-gp, gp}) {
    for (double eta : {-gp, gp}) {
      Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        // x = (1 + xi) / 2, so d/dx = 2 d/dxi
        const double dNdx = 2.0 * 0.25 * xi_n[a] * (1 + eta * eta_n[a]);
        const double dNdy = 2.0 * 0.25 * eta_n[a] * (1 + xi * xi_n[a]);
        B(0, 2 * a) = dNdx;
        B(1, 2 * a + 1) = dNdy;
        B(2, 2 * a) = dNdy;
        B(2, 2 * a + 1) = dNdx;
      }
      K += B.transpose() * D * B * 0.25;  // det J = 1/4, weights 1
    }
  }
  return K;
}

// Element components by flood fill over elements sharing at least one node.
inline int element_components(GridSize g, const BoolGrid& solid) {
  std::vector<int> label(g.elements(), -1);
  int n = 0;
  for (std::size_t s = 0; s < g.elements(); ++s) {
    if (!solid[s] || label[s] >= 0) continue;
    std::queue<std::size_t> q;
    q.push(s);
    label[s] = n;
    while (!q.empty()) {
      const std::size_t e = q.front();
      q.pop();
      const int r = static_cast<int>(e) / g.nelx, c = static_cast<int>(e) % g.nelx;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= g.nely || cc < 0 || cc >= g.nelx) continue;
          const std::size_t k = g.element(rr, cc);
          if (solid[k] && label[k] < 0) {
            label[k] = n;
            q.push(k);
          }
        }
      }
    }
    ++n;
  }
  return n;
}

// Error code thrown by fn, or nullopt when it returns normally.
template <typename F>
std::optional<ErrorCode> error_code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("topoforge_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
