#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vemflow/mesh.hpp"
#include "vemflow/physics.hpp"
#include "vemflow/types.hpp"
#include "vemflow/vem_core.hpp"

namespace vemflow {

enum class StabilizationVariant { Dofi, DRecipe };

struct StabilizationRecipe {
  StabilizationVariant variant = StabilizationVariant::Dofi;
  /// Positivity safeguard of the D-recipe.
  double sigma = 1e-3;

  /// Throws ConfigError when sigma <= 0 for the D-recipe.
  void validate() const;
};

std::string to_string(StabilizationVariant v);
/// "dofi" or "drecipe".
StabilizationVariant parse_stabilization(const std::string& name);

/// Mesh, degree, DOF maps, per-cell projectors and the interior quadrature
/// (order 2k+2) shared by every assembly routine.
class Discretization {
 public:
  Discretization(Mesh mesh, int k);

  const Mesh& mesh() const { return mesh_; }
  int k() const { return k_; }
  const DofMap& dofs() const { return dofs_; }
  const ElementOperators& ops(int cell) const { return ops_[cell]; }
  int num_cells() const { return mesh_.num_cells(); }

  const std::vector<QuadraturePoint>& quadrature(int cell) const { return quad_[cell]; }
  /// Monomials of degree <= k+1 at the quadrature points (one row per point).
  const Matrix& monomials_at_quadrature(int cell) const { return mono_[cell]; }

  /// Local DOF vectors of global vectors (V DOFs with the outward sign).
  Vector local_z(int cell, const Vector& global) const;
  Vector local_v(int cell, const Vector& global) const;
  Vector local_q(int cell, const Vector& global) const;

  /// Monomial coefficients of the Q basis function dual to the moments:
  /// column j holds psi_j, with (1/|E|) int psi_j m_a = delta_ja.
  const Matrix& pressure_basis(int cell) const { return qbasis_[cell]; }

 private:
  Mesh mesh_;
  int k_;
  DofMap dofs_;
  std::vector<ElementOperators> ops_;
  std::vector<std::vector<QuadraturePoint>> quad_;
  std::vector<Matrix> mono_;
  std::vector<Matrix> qbasis_;
};

/// Cell-dependent scalar data at a fixed time.
using CellFunction = std::function<double(int cell, const Vec2& x)>;
/// Freezes a CellField at time t.
CellFunction at_time(const CellField& f, double t);

enum class StabilizedForm { Mass, Diffusion, Darcy };

/// Context values entering the stabilization of one cell.
struct StabilizationContext {
  /// nu^E_M, nu^E_D or nu^E_A.
  double nu = 1.0;
  /// Diagonal of the local consistency matrix (D-recipe only).
  Vector consistency_diagonal;
  double area = 1.0;
};

/// DOF-space weight matrix W of the stabilization: dofi-dofi gives |E| I for
/// the Mass and Darcy forms and I for Diffusion (the nu factor is applied by
/// stabilization_scale); the D-recipe gives |E| diag(d_j) or diag(d_j) with
/// d_j = max(consistency_jj [/ |E|], sigma nu), which already contains nu.
Matrix stabilization_matrix(StabilizedForm form, const StabilizationRecipe& recipe,
                            const StabilizationContext& ctx, int size);
/// Factor multiplying W in the local form: nu for dofi-dofi, 1 for the D-recipe.
double stabilization_scale(const StabilizationRecipe& recipe, double nu);

/// Local matrices (local DOF ordering, outward-normal V DOFs).
struct LocalForm {
  Matrix consistency;
  Matrix stabilization;
  Matrix total() const { return consistency + stabilization; }
};

LocalForm local_mass_concentration(const Discretization& d, int cell, const SpaceField& phi,
                                   const StabilizationRecipe& recipe);
LocalForm local_diffusion(const Discretization& d, int cell, const Vector& U, const SpaceField& phi,
                          const Dispersion& disp, const StabilizationRecipe& recipe);
Matrix local_convection(const Discretization& d, int cell, const Vector& U, const CellFunction& q_plus,
                        const CellFunction& q_minus);
LocalForm local_darcy_mass(const Discretization& d, int cell, const Vector& C, const MobilityLaw& a,
                           const StabilizationRecipe& recipe);

/// Global sparse matrices.
SparseMatrix assemble_mass_concentration(const Discretization& d, const SpaceField& phi,
                                         const StabilizationRecipe& recipe);
SparseMatrix assemble_diffusion(const Discretization& d, const Vector& U, const SpaceField& phi,
                                const Dispersion& disp, const StabilizationRecipe& recipe);
SparseMatrix assemble_convection(const Discretization& d, const Vector& U, const CellFunction& q_plus,
                                 const CellFunction& q_minus);
SparseMatrix assemble_darcy_mass(const Discretization& d, const Vector& C, const MobilityLaw& a,
                                 const StabilizationRecipe& recipe);
/// B(v, q) = -(div v, q); rows are Q DOFs, columns V DOFs.
SparseMatrix assemble_divergence(const Discretization& d);

/// (f, Pi0 z) for every basis function z of Z_h.
Vector rhs_load(const Discretization& d, const CellFunction& f);
/// (q+ c_hat, Pi0 z).
Vector rhs_concentration(const Discretization& d, const CellFunction& q_plus, const CellFunction& c_hat);
/// (gamma(Pi0 C), Pi0 v); zero when gamma is empty.
Vector rhs_gravity(const Discretization& d, const GravityLaw& gamma, const Vector& C);
/// (G, q) for every basis function q of Q_h.
Vector rhs_mass(const Discretization& d, const CellFunction& G);

/// Per-cell averages used by the stabilization constants.
double cell_mean(const Discretization& d, int cell, const SpaceField& f);
/// Pi^0_0 of the velocity on a cell.
Vec2 cell_mean_velocity(const Discretization& d, int cell, const Vector& U);
/// Pi^0_0 of the concentration on a cell.
double cell_mean_concentration(const Discretization& d, int cell, const Vector& C);

/// Coordinate text dump: one "row col value" line per stored entry.
void write_coo(std::ostream& out, const SparseMatrix& m);

}  // namespace vemflow
