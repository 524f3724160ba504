#pragma once

#include <array>
#include <functional>
#include <vector>

#include "vemflow/mesh.hpp"
#include "vemflow/types.hpp"

namespace vemflow {

/// Dimension of the space of bivariate polynomials of total degree <= d
/// (zero for d < 0).
constexpr int poly_dim(int d) { return d < 0 ? 0 : (d + 1) * (d + 2) / 2; }

/// Throws UnsupportedDegree unless k is 0 or 1.
void require_supported_degree(int k);

/// Scaled monomials ((x - x_E)/h_E)^a1 ((y - y_E)/h_E)^a2 in graded
/// lexicographic order: 1, x, y, x^2, xy, y^2, ...
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(const Vec2& center, double h, int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const Vec2& center() const { return center_; }
  double h() const { return h_; }
  const std::array<int, 2>& exponent(int i) const { return exponents_[i]; }

  /// Position of (a1, a2) in the ordering; -1 if a component is negative.
  static int index(int a1, int a2);

  Vector values(const Vec2& x) const;
  /// Row 0 holds d/dx, row 1 holds d/dy.
  Eigen::Matrix<double, 2, Eigen::Dynamic> gradients(const Vec2& x) const;

 private:
  Vec2 center_ = Vec2::Zero();
  double h_ = 1.0;
  int degree_ = 0;
  std::vector<std::array<int, 2>> exponents_;
};

struct LocalDofCounts {
  int nZ = 0;
  int nV = 0;
  int nQ = 0;
  friend bool operator==(const LocalDofCounts&, const LocalDofCounts&) = default;
};

/// Local dimensions of the concentration, velocity and pressure spaces on a
/// polygon with n_vertices vertices (= edges).
LocalDofCounts local_dof_counts(int n_vertices, int k);

/// A single polygon with everything needed to build its local operators.
///
/// Local DOF layout:
///   Z: vertex values, then k interior Gauss-Lobatto values per edge (local
///      edge order, along the local direction), then moments against P_{k-1}.
///   V: k+1 normal moments per edge (outward normal, edge monomials measured
///      along the global edge direction), then divergence moments against
///      P_k minus constants, then moments of v . x^perp against P_{k-1}.
///   Q: moments against P_k.
struct LocalElement {
  std::vector<Vec2> vertices;
  /// True when local edge i runs against its global direction.
  std::vector<bool> edge_reversed;
  PolygonGeometry geometry;
  int k = 0;
  int cell = -1;

  static LocalElement from_mesh(const Mesh& mesh, int cell, int k);
  static LocalElement from_polygon(std::vector<Vec2> vertices, int k);

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  LocalDofCounts counts() const { return local_dof_counts(num_vertices(), k); }
  double area() const { return geometry.area; }
  double diameter() const { return geometry.diameter; }
  const Vec2& centroid() const { return geometry.centroid; }

  /// Scaled monomials of the given degree centred at the centroid.
  MonomialBasis basis(int degree) const;
  /// Integral of the scaled monomial with exponents (a1, a2); exact.
  double monomial_integral(int a1, int a2) const;
  /// Mass matrix of the scaled monomials of degree <= d.
  Matrix mass_matrix(int d) const;

  /// Global-direction sign of local edge i (+1 or -1).
  double edge_sign(int i) const { return edge_reversed[i] ? -1.0 : 1.0; }
  /// Outward unit normal of local edge i.
  Vec2 outward_normal(int i) const;
  double edge_length(int i) const;
  /// Point at parameter s in [0, 1] along local edge i.
  Vec2 edge_point(int i, double s) const;
  /// Edge monomial j at local parameter s, measured along the global
  /// direction: (sign * (s - 1/2))^j.
  double edge_monomial(int i, int j, double s) const;

  // Local DOF indices.
  int z_vertex(int i) const { return i; }
  int z_edge_node(int i, int j) const { return num_vertices() + i * k + j; }
  int z_moment(int j) const { return num_vertices() * (k + 1) + j; }
  int v_edge(int i, int j) const { return i * (k + 1) + j; }
  /// Divergence moment against monomial alpha, 1 <= alpha < poly_dim(k).
  int v_div(int alpha) const { return num_vertices() * (k + 1) + alpha - 1; }
  int v_rot(int j) const { return num_vertices() * (k + 1) + poly_dim(k) - 1 + j; }
};

/// Global numbering of the three discrete spaces.
class DofMap {
 public:
  DofMap() = default;
  DofMap(const Mesh& mesh, int k);

  int k() const { return k_; }
  int num_z() const { return num_z_; }
  int num_v() const { return num_v_; }
  int num_q() const { return num_q_; }

  const std::vector<int>& z_dofs(int cell) const { return z_[cell]; }
  const std::vector<int>& v_dofs(int cell) const { return v_[cell]; }
  /// +1/-1 factors mapping global V DOFs to the cell's outward-normal DOFs.
  const std::vector<double>& v_signs(int cell) const { return v_sign_[cell]; }
  const std::vector<int>& q_dofs(int cell) const { return q_[cell]; }

  /// Normal moments on boundary edges, fixed to zero by the no-flow condition.
  bool v_on_boundary(int dof) const { return v_boundary_[dof] != 0; }

  int z_vertex_dof(int v) const { return v; }
  int v_edge_dof(int e, int j) const { return e * (k_ + 1) + j; }

 private:
  int k_ = 0;
  int num_z_ = 0;
  int num_v_ = 0;
  int num_q_ = 0;
  std::vector<std::vector<int>> z_;
  std::vector<std::vector<int>> v_;
  std::vector<std::vector<double>> v_sign_;
  std::vector<std::vector<int>> q_;
  std::vector<std::uint8_t> v_boundary_;
};

/// Computable projector matrices of one cell. Polynomial outputs are
/// coefficient vectors in the cell's scaled monomial basis; vector-valued
/// outputs stack the x-component coefficients above the y-component ones.
struct ElementOperators {
  LocalElement element;
  /// Pi^nabla_{k+1}: Z-dofs -> P_{k+1}.
  Matrix pinabla;
  /// Pi^0_{k+1} on the enhanced space: Z-dofs -> P_{k+1}.
  Matrix pi0;
  /// Pi^0_k of the gradient: Z-dofs -> [P_k]^2.
  Matrix pi0_grad;
  /// Vector Pi^0_k: V-dofs -> [P_k]^2.
  Matrix pi0_vec;
  /// Exact divergence: V-dofs -> P_k.
  Matrix divergence;
  /// Z-dofs of the monomials of degree <= k+1 (columns).
  Matrix z_dofs_of_monomials;
  /// V-dofs of the vector monomials of degree <= k (columns).
  Matrix v_dofs_of_monomials;
  /// Mass matrix of the monomials of degree <= k+1.
  Matrix mass;
};

/// Local DOF vector of the polynomials of degree <= k+1 (columns).
Matrix z_dofs_of_polynomials(const LocalElement& el);
/// Local DOF vector of the vector polynomials of degree <= k (columns).
Matrix v_dofs_of_polynomials(const LocalElement& el);

Matrix compute_pinabla(const LocalElement& el);
Matrix compute_pi0_scalar(const LocalElement& el, const Matrix& pinabla);
Matrix compute_pi0_grad(const LocalElement& el);
Matrix compute_divergence_map(const LocalElement& el);
Matrix compute_pi0_vector_V(const LocalElement& el, const Matrix& divergence);

ElementOperators build_element_operators(const LocalElement& el);
std::vector<ElementOperators> build_element_operators(const Mesh& mesh, int k);

using ScalarFunction = std::function<double(const Vec2&)>;
using VectorFunction = std::function<Vec2(const Vec2&)>;

/// Local DOFs of a smooth function (quadrature of the given order for
/// moments).
Vector local_interpolate_scalar(const LocalElement& el, const ScalarFunction& f, int order = 8);
Vector local_interpolate_velocity(const LocalElement& el, const VectorFunction& f, int order = 8);

/// Global DOF vectors of the VEM interpolants.
Vector interpolate_scalar(const Mesh& mesh, const DofMap& dofs, const ScalarFunction& f, int order = 8);
Vector interpolate_velocity(const Mesh& mesh, const DofMap& dofs, const VectorFunction& f, int order = 8);

/// Evaluates a coefficient vector against a monomial basis.
inline double eval_poly(const MonomialBasis& b, const Vector& coeffs, const Vec2& x) {
  return b.values(x).head(coeffs.size()).dot(coeffs);
}

}  // namespace vemflow
