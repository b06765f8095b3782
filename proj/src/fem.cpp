#include "topoforge/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "topoforge/error.hpp"

namespace topoforge {

void MaterialParams::check() const {
  if (!(Emin > 0.0 && Emin < E0)) throw Error(ErrorCode::InvalidArgument, "material requires 0 < Emin < E0");
  if (!(nu >= 0.0 && nu < 0.5)) throw Error(ErrorCode::InvalidArgument, "Poisson ratio must lie in [0, 0.5)");
  if (!(penal >= 1.0)) throw Error(ErrorCode::InvalidArgument, "penalization exponent must be >= 1");
}

DensityField DensityField::uniform(const DesignProblem& problem, double value) {
  DensityField f{problem.grid, std::vector<double>(problem.grid.elements(), 0.0), problem.domain};
  for (std::size_t e = 0; e < f.rho.size(); ++e) {
    if (f.domain[e]) f.rho[e] = value;
  }
  return f;
}

void DensityField::check() const {
  if (rho.size() != grid.elements() || domain.size() != grid.elements()) {
    throw Error(ErrorCode::DimensionMismatch, "density field does not match its grid");
  }
  for (std::size_t e = 0; e < rho.size(); ++e) {
    if (!(rho[e] >= 0.0 && rho[e] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("density {} at element {} outside [0, 1]", rho[e], e));
    }
  }
}

ElementMatrix element_stiffness(double nu) {
  // Closed form of the 2x2 Gauss rule for the bilinear quad, which is exact
  // for this element on a square.
  const double k[8] = {0.5 - nu / 6.0,         0.125 + nu / 8.0,  -0.25 - nu / 12.0, -0.125 + 3.0 * nu / 8.0,
                       -0.25 + nu / 12.0,      -0.125 - nu / 8.0, nu / 6.0,          0.125 - 3.0 * nu / 8.0};
  constexpr int idx[8][8] = {{0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
                             {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
                             {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0}};
  ElementMatrix ke;
  const double scale = 1.0 / (1.0 - nu * nu);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) ke(i, j) = scale * k[idx[i][j]];
  }
  return ke;
}

double simp_modulus(double rho, const MaterialParams& mp) {
  return mp.Emin + std::pow(rho, mp.penal) * (mp.E0 - mp.Emin);
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kResidualTolerance = 1e-8;
constexpr double kPivotRatioFloor = 1e-13;

}  // namespace

struct PlaneStressSolver::Impl {
  GridSize grid;
  MaterialParams mp;
  ElementMatrix ke;
  std::vector<std::uint8_t> fixed;
  std::vector<int> free_index;  // global dof -> reduced index, -1 if fixed
  std::vector<std::array<std::size_t, 8>> edofs;
  Eigen::VectorXd f_full;
  Eigen::VectorXd f_free;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt;
  bool analyzed = false;
  std::vector<Triplet> triplets;

  Impl(const DesignProblem& problem, const MaterialParams& params) : grid(problem.grid), mp(params) {
    check_problem(problem);
    mp.check();
    ke = element_stiffness(mp.nu);

    const std::size_t ndof = grid.dofs();
    fixed.assign(ndof, 0);
    for (const auto& fixing : problem.fixings) {
      const auto [i, j] = nearest_node(grid, fixing.position);
      const std::size_t node = grid.node(i, j);
      if (fixing.kind != FixKind::FixY) fixed[2 * node] = 1;
      if (fixing.kind != FixKind::FixX) fixed[2 * node + 1] = 1;
    }
    free_index.assign(ndof, -1);
    int nfree = 0;
    for (std::size_t d = 0; d < ndof; ++d) {
      if (!fixed[d]) free_index[d] = nfree++;
    }

    f_full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ndof));
    for (const auto& load : problem.loads) {
      const NodalStencil s = load_stencil(grid, load.position);
      const double rad = load.angle_deg * std::numbers::pi / 180.0;
      const double fx = load.magnitude * std::cos(rad);
      const double fy = load.magnitude * std::sin(rad);
      for (std::size_t k = 0; k < 4; ++k) {
        f_full[static_cast<Eigen::Index>(2 * s.nodes[k])] += s.weights[k] * fx;
        f_full[static_cast<Eigen::Index>(2 * s.nodes[k] + 1)] += s.weights[k] * fy;
      }
    }
    f_free.resize(nfree);
    for (std::size_t d = 0; d < ndof; ++d) {
      if (free_index[d] >= 0) f_free[free_index[d]] = f_full[static_cast<Eigen::Index>(d)];
    }

    edofs.reserve(grid.elements());
    for (int row = 0; row < grid.nely; ++row) {
      for (int col = 0; col < grid.nelx; ++col) {
        const auto nodes = grid.element_nodes(row, col);
        std::array<std::size_t, 8> ed{};
        for (std::size_t k = 0; k < 4; ++k) {
          ed[2 * k] = 2 * nodes[k];
          ed[2 * k + 1] = 2 * nodes[k] + 1;
        }
        edofs.push_back(ed);
      }
    }
  }

  FemSolution solve(const DensityField& field) {
    if (field.grid != grid || field.rho.size() != grid.elements() || field.domain.size() != grid.elements()) {
      throw Error(ErrorCode::DimensionMismatch, "density field does not match the problem grid");
    }
    const auto nfree = static_cast<Eigen::Index>(f_free.size());
    if (nfree == 0) throw Error(ErrorCode::SingularSystem, "every degree of freedom is fixed");

    triplets.clear();
    triplets.reserve(edofs.size() * 36);
    for (std::size_t e = 0; e < edofs.size(); ++e) {
      const double modulus = simp_modulus(field.domain[e] ? field.rho[e] : 0.0, mp);
      const auto& ed = edofs[e];
      for (int a = 0; a < 8; ++a) {
        const int ia = free_index[ed[a]];
        if (ia < 0) continue;
        for (int b = 0; b < 8; ++b) {
          const int ib = free_index[ed[b]];
          if (ib < 0 || ib > ia) continue;
          triplets.emplace_back(ia, ib, modulus * ke(a, b));
        }
      }
    }
    SparseMatrix k(nfree, nfree);
    k.setFromTriplets(triplets.begin(), triplets.end());

    if (!analyzed) {
      ldlt.analyzePattern(k);
      analyzed = true;
    }
    ldlt.factorize(k);
    if (ldlt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularSystem, "stiffness factorization failed; the problem may be under-constrained");
    }
    const Eigen::VectorXd& pivots = ldlt.vectorD();
    const double max_pivot = pivots.cwiseAbs().maxCoeff();
    if (pivots.minCoeff() <= kPivotRatioFloor * max_pivot) {
      throw Error(ErrorCode::SingularSystem, "stiffness matrix is singular; the problem is under-constrained");
    }
    const Eigen::VectorXd u_free = ldlt.solve(f_free);
    const Eigen::VectorXd residual = k.selfadjointView<Eigen::Lower>() * u_free - f_free;
    const double fnorm = f_free.norm();
    const double rel = fnorm > 0.0 ? residual.norm() / fnorm : residual.norm();
    if (!u_free.allFinite() || !(rel <= kResidualTolerance)) {
      throw Error(ErrorCode::SingularSystem, fmt::format("linear solve residual {} exceeds tolerance", rel));
    }

    FemSolution sol;
    sol.u.assign(grid.dofs(), 0.0);
    for (std::size_t d = 0; d < grid.dofs(); ++d) {
      if (free_index[d] >= 0) sol.u[d] = u_free[free_index[d]];
    }
    sol.element_energy.resize(edofs.size());
    double compliance = 0.0;
    Eigen::Matrix<double, 8, 1> ue;
    for (std::size_t e = 0; e < edofs.size(); ++e) {
      for (int a = 0; a < 8; ++a) ue[a] = sol.u[edofs[e][a]];
      const double energy = std::max(0.0, ue.dot(ke * ue));
      sol.element_energy[e] = energy;
      compliance += simp_modulus(field.domain[e] ? field.rho[e] : 0.0, mp) * energy;
    }
    sol.compliance = compliance;
    sol.work = u_free.dot(f_free);
    sol.diagnostics = {1, rel};
    return sol;
  }
};

PlaneStressSolver::PlaneStressSolver(const DesignProblem& problem, const MaterialParams& mp)
    : impl_(std::make_unique<Impl>(problem, mp)) {}
PlaneStressSolver::~PlaneStressSolver() = default;
PlaneStressSolver::PlaneStressSolver(PlaneStressSolver&&) noexcept = default;
PlaneStressSolver& PlaneStressSolver::operator=(PlaneStressSolver&&) noexcept = default;

FemSolution PlaneStressSolver::solve(const DensityField& field) { return impl_->solve(field); }
const Eigen::VectorXd& PlaneStressSolver::load_vector() const { return impl_->f_full; }
const std::vector<std::uint8_t>& PlaneStressSolver::fixed_dofs() const { return impl_->fixed; }

FemSolution assemble_and_solve(const DensityField& field, const DesignProblem& problem, const MaterialParams& mp) {
  PlaneStressSolver solver(problem, mp);
  return solver.solve(field);
}

std::vector<double> compliance_sensitivity(const DensityField& field, const FemSolution& sol, const MaterialParams& mp) {
  if (sol.element_energy.size() != field.rho.size()) {
    throw Error(ErrorCode::DimensionMismatch, "solution does not match density field");
  }
  std::vector<double> sens(field.rho.size(), 0.0);
  for (std::size_t e = 0; e < sens.size(); ++e) {
    if (!field.domain[e]) continue;
    sens[e] = -mp.penal * std::pow(field.rho[e], mp.penal - 1.0) * (mp.E0 - mp.Emin) * sol.element_energy[e];
  }
  return sens;
}

}  // namespace topoforge
