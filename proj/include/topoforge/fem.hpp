#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "topoforge/grid.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

struct MaterialParams {
  double E0 = 1.0;     ///< solid-phase Young's modulus
  double Emin = 1e-9;  ///< void-phase modulus
  double nu = 0.3;
  double penal = 3.0;

  /// Throws InvalidArgument unless 0 < Emin < E0, 0 <= nu < 0.5, penal >= 1.
  void check() const;
};

/// Per-element densities in [0, 1]; non-domain elements hold 0.
struct DensityField {
  GridSize grid;
  std::vector<double> rho;
  BoolGrid domain;

  /// `value` on the domain, 0 elsewhere.
  static DensityField uniform(const DesignProblem& problem, double value);

  void check() const;
};

struct SolverDiagnostics {
  int iterations = 0;  ///< 1 for the direct factorization
  double relative_residual = 0.0;
};

struct FemSolution {
  std::vector<double> u;               ///< 2 DOF per node, x then y
  double compliance = 0.0;             ///< U^T K U
  double work = 0.0;                   ///< U^T F, equal to compliance up to solver error
  std::vector<double> element_energy;  ///< u_e^T k0 u_e, unit modulus
  SolverDiagnostics diagnostics;
};

using ElementMatrix = Eigen::Matrix<double, 8, 8>;

/// Stiffness of a unit-square bilinear quad in plane stress with unit
/// modulus and thickness. DOF order: (x, y) of the lower-left node, then
/// counter-clockwise.
ElementMatrix element_stiffness(double nu);

/// E(rho) = Emin + rho^p (E0 - Emin)
double simp_modulus(double rho, const MaterialParams& mp);

/// Reusable solver for one problem's mesh, loads and supports. The symbolic
/// factorization is computed once and shared by every `solve` call.
class PlaneStressSolver {
 public:
  PlaneStressSolver(const DesignProblem& problem, const MaterialParams& mp);
  ~PlaneStressSolver();
  PlaneStressSolver(PlaneStressSolver&&) noexcept;
  PlaneStressSolver& operator=(PlaneStressSolver&&) noexcept;

  /// Throws SingularSystem when the stiffness matrix cannot be factorized or
  /// the residual check fails, DimensionMismatch on a wrong-sized field.
  FemSolution solve(const DensityField& field);

  const Eigen::VectorXd& load_vector() const;
  const std::vector<std::uint8_t>& fixed_dofs() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

FemSolution assemble_and_solve(const DensityField& field, const DesignProblem& problem, const MaterialParams& mp);

/// dc/drho_e = -p rho_e^(p-1) (E0 - Emin) e_e; zero outside the domain.
std::vector<double> compliance_sensitivity(const DensityField& field, const FemSolution& sol, const MaterialParams& mp);

}  // namespace topoforge
