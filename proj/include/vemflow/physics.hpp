#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vemflow/mesh.hpp"
#include "vemflow/types.hpp"

namespace vemflow {

/// phi [d_m I + |u| (d_l E(u) + d_t (I - E(u)))], E(u) = u u^T / |u|^2.
/// At u = 0 the dispersive part vanishes and phi d_m I is returned.
Mat2 diffusion_tensor(const Vec2& u, double phi, double d_m, double d_l, double d_t);

/// mu0 (1 + (M^{1/4} - 1) c)^{-4}, with c clamped to [0, 1].
double viscosity(double c, double mu0, double M);
/// (kappa / mu0) (1 + (M^{1/4} - 1) c)^4, with c clamped to [0, 1].
double mobility(double c, double kappa_over_mu0, double M);

struct Dispersion {
  double d_m = 0.0;
  double d_l = 0.0;
  double d_t = 0.0;
};

/// Mobility a(c, x) together with its declared bounds; forms reject samples
/// outside [lower, upper].
struct MobilityLaw {
  std::function<double(double c, const Vec2& x)> a;
  double lower = 0.0;
  double upper = 0.0;
};

/// Gravity term gamma(c, x); an empty function means gamma = 0.
using GravityLaw = std::function<Vec2(double c, const Vec2& x)>;

struct Coefficients {
  SpaceField porosity;
  double porosity_lower = 0.0;
  Dispersion dispersion;
  MobilityLaw mobility;
  GravityLaw gravity;
  /// Injection and production densities (both >= 0).
  CellField q_plus;
  CellField q_minus;
  /// Concentration of the injected fluid.
  CellField c_hat;
  /// Additional concentration source, used by manufactured solutions. May be empty.
  CellField source;
  SpaceField c0;
  /// Accept d_m = 0 (logs a warning instead of rejecting).
  bool allow_degenerate_dispersion = false;

  /// G = q+ - q-.
  double G(int cell, const Vec2& x, double t) const { return q_plus(cell, x, t) - q_minus(cell, x, t); }

  /// Checks dispersion ordering and positivity of the scalar constants.
  void validate() const;
};

enum class WellKind { Injection, Production };

struct Well {
  Vec2 location = Vec2::Zero();
  double rate = 0.0;
  WellKind kind = WellKind::Injection;
  double concentration = 1.0;
};

struct WellSet {
  std::vector<Well> wells;

  double total_injection() const;
  double total_production() const;
  /// Rates non-negative and injection balancing production to `tol` relative.
  void validate(double tol = 1e-12) const;
};

/// Cell-constant well densities.
struct CellDensities {
  std::vector<double> q_plus;
  std::vector<double> q_minus;
  /// Rate-weighted injected concentration per cell (0 where q_plus = 0).
  std::vector<double> c_hat;

  CellField q_plus_field() const;
  CellField q_minus_field() const;
  CellField c_hat_field() const;
};

/// Each well becomes rate / |E| on the lowest-index cell containing it.
CellDensities wells_to_density(const WellSet& wells, const Mesh& mesh);

struct ExactSolution {
  ScalarSpaceTimeField c;
  VectorSpaceTimeField grad_c;
  VectorSpaceTimeField u;
  ScalarSpaceTimeField p;
};

/// A complete benchmark: domain, horizon, coefficients (built per mesh since
/// well densities depend on it) and, for manufactured problems, the exact
/// fields.
struct Problem {
  std::string name;
  Rect domain;
  double T = 0.0;
  double default_tau = 0.0;
  int default_mesh_n = 0;
  std::function<Coefficients(const Mesh&)> coefficients;
  std::optional<ExactSolution> exact;
  std::optional<WellSet> wells;
};

/// Manufactured solution with its generalised sources.
struct ManufacturedProblem {
  Problem problem;
  ExactSolution exact;
  /// div u.
  ScalarSpaceTimeField g;
  /// phi c_t + u . grad c - div(D(u) grad c).
  ScalarSpaceTimeField f;
  double phi = 1.0;
  Dispersion dispersion;
};

/// Smooth manufactured test on the unit square, T = 0.01. Sources are
/// q+ = max(g, 0), q- = max(-g, 0), injected concentration c itself and the
/// extra source f, so that the exact fields satisfy the discrete model's
/// continuous counterpart with G = g.
ManufacturedProblem example1_problem();

enum class Example2Variant { TestA, TestB };

/// Quarter-five-spot on (0, 1000)^2, T = 3600, tau = 36, wells of rate 30 at
/// opposite corners.
Problem example2_problem(Example2Variant variant);

/// Parses "example1", "example2a", "example2b".
Problem problem_by_name(const std::string& name);

}  // namespace vemflow
