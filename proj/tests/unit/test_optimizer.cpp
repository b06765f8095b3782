#include <doctest.h>

#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "topoforge/filter.hpp"
#include "topoforge/optimizer.hpp"

using namespace topoforge;

namespace {

// Direct weighted average over every element pair.
std::vector<double> brute_force_filter(GridSize g, const BoolGrid& support, const std::vector<double>& x, double rmin) {
  std::vector<double> out(x);
  for (int r = 0; r < g.nely; ++r) {
    for (int c = 0; c < g.nelx; ++c) {
      const std::size_t e = g.element(r, c);
      if (!support[e]) continue;
      double num = 0, den = 0;
      for (int rr = 0; rr < g.nely; ++rr) {
        for (int cc = 0; cc < g.nelx; ++cc) {
          const std::size_t k = g.element(rr, cc);
          if (!support[k]) continue;
          const double w = std::max(0.0, rmin - std::hypot(rr - r, cc - c));
          num += w * x[k];
          den += w;
        }
      }
      out[e] = den > 0 ? num / den : x[e];
    }
  }
  return out;
}

// Scalar bisection on lambda with the plain OC formula.
std::vector<double> oc_oracle(const std::vector<double>& x, const std::vector<double>& s, double vf, double move,
                              double eta) {
  auto step = [&](double lambda) {
    std::vector<double> y(x.size());
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double cand = x[e] * std::pow(-s[e] / lambda, eta);
      y[e] = std::clamp(cand, std::max(0.0, x[e] - move), std::min(1.0, x[e] + move));
    }
    return y;
  };
  double lo = 0, hi = 1e9;
  for (int k = 0; k < 400; ++k) {
    const double mid = 0.5 * (lo + hi);
    const auto y = step(mid);
    const double m = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    (m > vf ? lo : hi) = mid;
  }
  return step(0.5 * (lo + hi));
}

}  // namespace

TEST_CASE("filter preserves a uniform field") {
  const GridSize g{10, 7};
  const DensityFilter f(g, BoolGrid(g.elements(), 1), 2.5);
  const std::vector<double> x(g.elements(), 0.37);
  for (double v : f.apply(x)) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("filter with rmin <= 1 is the identity") {
  std::mt19937_64 rng(1);
  const GridSize g{6, 5};
  std::vector<double> x(g.elements());
  for (double& v : x) v = fixtures::rand_uniform(rng, 0, 1);
  for (double rmin : {0.0, 0.5, 1.0}) CHECK(DensityFilter(g, BoolGrid(g.elements(), 1), rmin).apply(x) == x);
}

TEST_CASE("filter matches brute-force convolution") {
  const GridSize g{5, 5};
  const BoolGrid all(g.elements(), 1);
  std::vector<double> spike(g.elements(), 0.0);
  spike[g.element(2, 2)] = 1.0;
  const auto got = DensityFilter(g, all, 2.0).apply(spike);
  const auto want = brute_force_filter(g, all, spike, 2.0);
  for (std::size_t e = 0; e < got.size(); ++e) CHECK(got[e] == doctest::Approx(want[e]).epsilon(1e-14));
  CHECK(got[g.element(2, 2)] > got[g.element(2, 3)]);
  CHECK(got[g.element(0, 0)] == 0.0);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const GridSize h{fixtures::rand_int(rng, 3, 12), fixtures::rand_int(rng, 3, 12)};
    BoolGrid support(h.elements());
    std::vector<double> x(h.elements());
    for (std::size_t e = 0; e < x.size(); ++e) {
      support[e] = rng() % 4 != 0;
      x[e] = fixtures::rand_uniform(rng, 0, 1);
    }
    const double rmin = fixtures::rand_uniform(rng, 1.0, 3.5);
    const DensityFilter f(h, support, rmin);
    const auto a = f.apply(x), b = brute_force_filter(h, support, x, rmin);
    for (std::size_t e = 0; e < x.size(); ++e) CHECK(a[e] == doctest::Approx(b[e]).epsilon(1e-12));

    // Bounds and adjoint consistency.
    const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
    for (double v : a) CHECK((v >= lo - 1e-15 && v <= hi + 1e-15));
    std::vector<double> y(x.size());
    for (double& v : y) v = fixtures::rand_uniform(rng, -1, 1);
    const auto aty = f.apply_adjoint(y);
    double lhs = 0, rhs = 0;
    for (std::size_t e = 0; e < x.size(); ++e) {
      lhs += a[e] * y[e];
      rhs += x[e] * aty[e];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("OC with uniform sensitivity returns the target everywhere") {
  DesignProblem p = fixtures::cantilever({8, 8});
  p.volume_fraction = 0.3;
  const DensityField rho = DensityField::uniform(p, 0.3);
  const std::vector<double> sens(p.grid.elements(), -2.0);
  const DensityField out = oc_update(rho, sens, p, SolverConfig{});
  for (double v : out.rho) CHECK(v == doctest::Approx(0.3).epsilon(1e-4));
}

TEST_CASE("OC respects the move limit") {
  std::mt19937_64 rng(6);
  DesignProblem p = fixtures::cantilever({8, 8});
  p.volume_fraction = 0.5;
  const DensityField rho = DensityField::uniform(p, 0.5);
  std::vector<double> sens(p.grid.elements());
  for (double& s : sens) s = -std::pow(10.0, fixtures::rand_uniform(rng, -4, 4));
  const DensityField out = oc_update(rho, sens, p, SolverConfig{});
  for (double v : out.rho) CHECK((v >= 0.3 - 1e-15 && v <= 0.7 + 1e-15));
  CHECK(editable_mean(out, p.domain) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("OC agrees with a scalar bisection oracle") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    DesignProblem p = fixtures::cantilever({8, 8});
    p.volume_fraction = fixtures::rand_uniform(rng, 0.3, 0.6);
    DensityField rho = DensityField::uniform(p, 0.0);
    for (double& v : rho.rho) v = std::clamp(p.volume_fraction + fixtures::rand_uniform(rng, -0.15, 0.15), 0.0, 1.0);
    std::vector<double> sens(p.grid.elements());
    for (double& s : sens) s = -fixtures::rand_uniform(rng, 0.01, 10.0);
    const SolverConfig cfg;
    const DensityField got = oc_update(rho, sens, p, cfg);
    const auto want = oc_oracle(rho.rho, sens, p.volume_fraction, cfg.move_limit, cfg.eta);
    CHECK(std::abs(editable_mean(got, p.domain) - p.volume_fraction) <= cfg.bisection_tol);
    for (std::size_t e = 0; e < want.size(); ++e) CHECK(std::abs(got.rho[e] - want[e]) < 1e-3);
  }
}

TEST_CASE("OC leaves frozen elements alone and reports unreachable targets") {
  DesignProblem p = fixtures::cantilever({6, 6});
  p.mask = BoolGrid(p.grid.elements(), 0);
  for (int c = 0; c < 3; ++c) (*p.mask)[p.grid.element(0, c)] = 1;
  p.volume_fraction = 0.5;
  DensityField rho = DensityField::uniform(p, 0.5);
  rho.rho[p.grid.element(5, 5)] = 0.123456789;
  const std::vector<double> sens(p.grid.elements(), -1.0);
  const DensityField out = oc_update(rho, sens, p, SolverConfig{});
  for (std::size_t e = 0; e < out.rho.size(); ++e)
    if (!(*p.mask)[e]) CHECK(out.rho[e] == rho.rho[e]);

  p.volume_fraction = 0.95;
  DensityField low = DensityField::uniform(p, 0.1);
  CHECK(fixtures::error_code_of([&] { oc_update(low, sens, p, SolverConfig{}); }) == ErrorCode::BisectionFailure);
}

TEST_CASE("optimize a small cantilever") {
  const DesignProblem p = fixtures::cantilever({24, 12});
  SolverConfig cfg;
  cfg.rmin = 1.5;
  const OptimizationResult a = optimize(p, cfg, MaterialParams{});
  CHECK(a.iterations > 0);
  CHECK(a.iterations <= cfg.max_iters);
  CHECK(std::abs(a.volume_fraction - 0.4) <= cfg.bisection_tol);
  CHECK(a.compliance_history.back() < a.compliance_history.front());
  for (double v : a.density.rho) CHECK((v >= 0.0 && v <= 1.0));

  const OptimizationResult b = optimize(p, cfg, MaterialParams{});
  CHECK(a.density.rho == b.density.rho);
  CHECK(a.compliance == b.compliance);
}

TEST_CASE("an empty mask leaves the initial field untouched") {
  DesignProblem p = fixtures::cantilever({10, 6});
  p.mask = BoolGrid(p.grid.elements(), 0);
  std::mt19937_64 rng(3);
  const DensityField init = fixtures::random_field(p, rng);
  const OptimizationResult r = optimize(p, SolverConfig{}, MaterialParams{}, init);
  CHECK(r.density.rho == init.rho);
  CHECK(r.iterations == 0);
}

TEST_CASE("masked optimization keeps frozen elements bit-identical") {
  DesignProblem p = fixtures::cantilever({20, 10});
  p.mask = BoolGrid(p.grid.elements(), 0);
  for (int r = 2; r < 8; ++r)
    for (int c = 8; c < 18; ++c) (*p.mask)[p.grid.element(r, c)] = 1;
  p.volume_fraction = 0.3;
  std::mt19937_64 rng(12);
  const DensityField init = fixtures::random_field(p, rng, 0.2, 1.0);
  int calls = 0;
  bool frozen_ok = true;
  const auto observer = [&](int, const DensityField& design, const DensityField& physical) {
    ++calls;
    for (std::size_t e = 0; e < init.rho.size(); ++e) {
      if ((*p.mask)[e]) continue;
      frozen_ok &= design.rho[e] == init.rho[e] && physical.rho[e] == init.rho[e];
    }
  };
  const OptimizationResult r = optimize(p, SolverConfig{}, MaterialParams{}, init, observer);
  CHECK(calls == r.iterations);
  CHECK(frozen_ok);
  CHECK(std::abs(editable_mean(r.design, *p.mask) - 0.3) <= 1e-3);
  CHECK(std::abs(r.volume_fraction - 0.3) <= 1e-3);
}

TEST_CASE("default initial field") {
  DesignProblem p = fixtures::cantilever({4, 4});
  p.domain[0] = 0;
  p.mask = BoolGrid(p.grid.elements(), 0);
  (*p.mask)[5] = 1;
  const DensityField f = default_initial_field(p);
  CHECK(f.rho[0] == 0.0);
  CHECK(f.rho[5] == p.volume_fraction);
  CHECK(f.rho[6] == 1.0);
}
