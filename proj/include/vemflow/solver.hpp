#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "vemflow/forms.hpp"
#include "vemflow/physics.hpp"

namespace vemflow {

struct State {
  int step = 0;
  double t = 0.0;
  Vector C;
  Vector U;
  Vector P;
};

struct SolverConfig {
  double tau = 0.0;
  double T = 0.0;
  int k = 0;
  StabilizationRecipe stabilization;
  bool fct = false;
  /// Velocity and pressure are recomputed every `reuse_period` steps.
  int reuse_period = 1;
  /// Relative residual required from every linear solve.
  double tolerance = 1e-10;
  /// Refinement sweeps allowed after the direct factorization.
  int max_iterations = 10;
  /// Store every `snapshot_every`-th state (0: only the final state).
  int snapshot_every = 0;
  /// Progress lines "step=<n> t=<t> residual_c=<r1> residual_up=<r2>".
  std::ostream* progress = nullptr;

  /// N = round(T / tau).
  int num_steps() const;
  /// Throws ConfigError on tau <= 0, T/tau more than 0.5 from an integer,
  /// reuse_period < 1 or a bad stabilization recipe.
  void validate() const;
};

/// Solves a * x = b by sparse LU with iterative refinement. Throws
/// ConvergenceFailure when the factorization breaks down or the relative
/// residual stays above `tolerance`.
Vector linear_solve(const SparseMatrix& a, const Vector& b, double tolerance = 1e-10, double* residual = nullptr,
                    int max_refinements = 10);

struct DarcyResult {
  Vector U;
  Vector P;
  /// Relative residual of the saddle-point solve.
  double residual = 0.0;
  /// Multiplier of the zero-mean constraint (vanishes for compatible data).
  double multiplier = 0.0;
  /// max |(div U, q_j) - (G, q_j)| over Q basis functions, divided by
  /// max |(G, q_j)| (or 1 when G vanishes).
  double divergence_defect = 0.0;
};

DarcyResult darcy_solve(const Discretization& d, const Coefficients& coeffs, const Vector& C, double t,
                        const StabilizationRecipe& recipe, double tolerance = 1e-10, int max_refinements = 10);

/// Backward Euler step (M + tau Theta + tau D) C = tau F(t_n) + M C_prev with the
/// velocity lagged.
Vector concentration_step(const Discretization& d, const Coefficients& coeffs, const Vector& C_prev,
                          const Vector& U_prev, double tau, double t_n, const StabilizationRecipe& recipe,
                          double tolerance = 1e-10, double* residual = nullptr);

struct FctDiagnostics {
  Vector C_low;
  double alpha_min = 1.0;
  double alpha_max = 0.0;
  /// Sum over all ordered pairs of the limited fluxes (zero by antisymmetry).
  double flux_sum = 0.0;
  double residual = 0.0;
};

/// Linearised flux-corrected step (k = 0 only): lumped-mass low-order solve
/// with algebraic diffusion, then Zalesak-limited antidiffusive fluxes.
Vector fct_concentration_step(const Discretization& d, const Coefficients& coeffs, const Vector& C_prev,
                              const Vector& U_prev, double tau, double t_n, const StabilizationRecipe& recipe,
                              double tolerance = 1e-10, FctDiagnostics* diag = nullptr);

struct StepDiagnostics {
  int step = 0;
  double t = 0.0;
  double residual_c = 0.0;
  double residual_up = 0.0;
  bool darcy_updated = false;
  double divergence_defect = 0.0;
  /// Extremes over the nodal (vertex and edge) concentration DOFs.
  double c_min = 0.0;
  double c_max = 0.0;
  /// Sum_i m_i C_i with the row-sum lumped concentration mass matrix.
  double lumped_mass = 0.0;
  double alpha_min = 1.0;
  double alpha_max = 0.0;
  double flux_sum = 0.0;
};

struct SimulationResult {
  State final_state;
  std::vector<State> snapshots;
  /// Entry 0 describes the initial state and Darcy solve.
  std::vector<StepDiagnostics> steps;
};

/// C^0 = I_h c0, (U^0, P^0) from C^0; then N concentration steps, with the
/// Darcy system re-solved whenever n is a multiple of the reuse period.
SimulationResult run_simulation(const Discretization& d, const Coefficients& coeffs, const SolverConfig& config);

}  // namespace vemflow
