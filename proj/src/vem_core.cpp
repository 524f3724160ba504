#include "vemflow/vem_core.hpp"

#include <cmath>
#include <sstream>

#include "vemflow/errors.hpp"
#include "vemflow/log.hpp"
#include "vemflow/quadrature.hpp"

namespace vemflow {

void require_supported_degree(int k) {
  if (k < 0 || k > 1) throw UnsupportedDegree(k);
}

// ---------------------------------------------------------------------------
// Monomials

MonomialBasis::MonomialBasis(const Vec2& center, double h, int degree)
    : center_(center), h_(h), degree_(degree) {
  for (int d = 0; d <= degree; ++d)
    for (int a2 = 0; a2 <= d; ++a2) exponents_.push_back({d - a2, a2});
}

int MonomialBasis::index(int a1, int a2) {
  if (a1 < 0 || a2 < 0) return -1;
  return poly_dim(a1 + a2 - 1) + a2;
}

Vector MonomialBasis::values(const Vec2& x) const {
  const Vec2 s = (x - center_) / h_;
  Vector v(size());
  for (int i = 0; i < size(); ++i) v(i) = std::pow(s.x(), exponents_[i][0]) * std::pow(s.y(), exponents_[i][1]);
  return v;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> MonomialBasis::gradients(const Vec2& x) const {
  const Vec2 s = (x - center_) / h_;
  Eigen::Matrix<double, 2, Eigen::Dynamic> g(2, size());
  for (int i = 0; i < size(); ++i) {
    const auto [a1, a2] = exponents_[i];
    g(0, i) = a1 == 0 ? 0.0 : a1 * std::pow(s.x(), a1 - 1) * std::pow(s.y(), a2) / h_;
    g(1, i) = a2 == 0 ? 0.0 : a2 * std::pow(s.x(), a1) * std::pow(s.y(), a2 - 1) / h_;
  }
  return g;
}

LocalDofCounts local_dof_counts(int n_vertices, int k) {
  if (k < 0) throw InvalidInput("negative polynomial degree");
  const int ne = n_vertices;
  return {n_vertices + k * ne + poly_dim(k - 1),
          (k + 1) * ne + (poly_dim(k) - 1) + poly_dim(k - 1),
          poly_dim(k)};
}

// ---------------------------------------------------------------------------
// Local element

LocalElement LocalElement::from_mesh(const Mesh& mesh, int cell, int k) {
  require_supported_degree(k);
  LocalElement el;
  el.vertices = mesh.cell_vertices(cell);
  el.geometry = mesh.geometry(cell);
  el.k = k;
  el.cell = cell;
  const int n = el.num_vertices();
  el.edge_reversed.resize(n);
  for (int i = 0; i < n; ++i) el.edge_reversed[i] = mesh.cell_edge_reversed(cell, i);
  return el;
}

LocalElement LocalElement::from_polygon(std::vector<Vec2> vertices, int k) {
  require_supported_degree(k);
  LocalElement el;
  el.geometry = polygon_geometry(vertices);
  el.vertices = std::move(vertices);
  el.k = k;
  el.edge_reversed.assign(el.vertices.size(), false);
  return el;
}

MonomialBasis LocalElement::basis(int degree) const { return {centroid(), diameter(), degree}; }

double LocalElement::monomial_integral(int a1, int a2) const {
  if (a1 < 0 || a2 < 0) return 0.0;
  return integrate_scaled_monomial(vertices, centroid(), diameter(), a1, a2);
}

Matrix LocalElement::mass_matrix(int d) const {
  const MonomialBasis b = basis(d);
  const int n = b.size();
  Matrix h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const auto& ei = b.exponent(i);
      const auto& ej = b.exponent(j);
      h(i, j) = h(j, i) = monomial_integral(ei[0] + ej[0], ei[1] + ej[1]);
    }
  return h;
}

Vec2 LocalElement::outward_normal(int i) const {
  const Vec2 t = vertices[(i + 1) % vertices.size()] - vertices[i];
  return Vec2(t.y(), -t.x()) / t.norm();
}

double LocalElement::edge_length(int i) const {
  return (vertices[(i + 1) % vertices.size()] - vertices[i]).norm();
}

Vec2 LocalElement::edge_point(int i, double s) const {
  const Vec2& a = vertices[i];
  const Vec2& b = vertices[(i + 1) % vertices.size()];
  return a + s * (b - a);
}

double LocalElement::edge_monomial(int i, int j, double s) const {
  return std::pow(edge_sign(i) * (s - 0.5), j);
}

// ---------------------------------------------------------------------------
// Global DOF map

DofMap::DofMap(const Mesh& mesh, int k) : k_(k) {
  require_supported_degree(k);
  const int nv = mesh.num_vertices();
  const int ne = mesh.num_edges();
  const int nc = mesh.num_cells();
  const int z_cell = poly_dim(k - 1);
  const int v_cell = poly_dim(k) - 1 + poly_dim(k - 1);
  num_z_ = nv + k * ne + z_cell * nc;
  num_v_ = (k + 1) * ne + v_cell * nc;
  num_q_ = poly_dim(k) * nc;

  z_.resize(nc);
  v_.resize(nc);
  v_sign_.resize(nc);
  q_.resize(nc);
  v_boundary_.assign(num_v_, 0);
  for (int e = 0; e < ne; ++e)
    if (mesh.edge(e).on_boundary())
      for (int j = 0; j <= k; ++j) v_boundary_[v_edge_dof(e, j)] = 1;

  for (int c = 0; c < nc; ++c) {
    const auto& loop = mesh.cell(c);
    const auto& edges = mesh.cell_edges(c);
    const int n = static_cast<int>(loop.size());
    auto& z = z_[c];
    for (int v : loop) z.push_back(v);
    for (int i = 0; i < n; ++i) {
      const bool rev = mesh.cell_edge_reversed(c, i);
      for (int j = 0; j < k; ++j) z.push_back(nv + edges[i] * k + (rev ? k - 1 - j : j));
    }
    for (int j = 0; j < z_cell; ++j) z.push_back(nv + k * ne + c * z_cell + j);

    auto& v = v_[c];
    auto& s = v_sign_[c];
    for (int i = 0; i < n; ++i) {
      const double sign = mesh.cell_edge_reversed(c, i) ? -1.0 : 1.0;
      for (int j = 0; j <= k; ++j) {
        v.push_back(v_edge_dof(edges[i], j));
        s.push_back(sign);
      }
    }
    for (int j = 0; j < v_cell; ++j) {
      v.push_back((k + 1) * ne + c * v_cell + j);
      s.push_back(1.0);
    }
    for (int j = 0; j < poly_dim(k); ++j) q_[c].push_back(c * poly_dim(k) + j);
  }
}

// ---------------------------------------------------------------------------
// Projectors

namespace {

// Solves a * x = b for a small dense system, flagging near-singular cells.
Matrix solve_local(const Matrix& a, const Matrix& b, const LocalElement& el, const char* what) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 1e-15 * smax)) throw IllShapedCell(el.cell, std::string(what) + ": singular local system");
  const double cond = smax / smin;
  if (cond > 1e12) {
    std::ostringstream msg;
    msg << "cell " << el.cell << ": " << what << " local system condition number " << cond;
    log_warning(msg.str());
  }
  return a.fullPivLu().solve(b);
}

// Gauss-Lobatto nodes of local edge i, as (parameter, weight*|e|, local dof).
struct EdgeNode {
  double s;
  double w;
  int dof;
};

std::vector<EdgeNode> edge_nodes(const LocalElement& el, int i) {
  const int k = el.k;
  const Rule1D gl = gauss_lobatto(k + 2);
  const double len = el.edge_length(i);
  const int n = el.num_vertices();
  std::vector<EdgeNode> out;
  out.push_back({0.0, gl.weights[0] * len, el.z_vertex(i)});
  for (int j = 0; j < k; ++j) out.push_back({gl.nodes[j + 1], gl.weights[j + 1] * len, el.z_edge_node(i, j)});
  out.push_back({1.0, gl.weights[k + 1] * len, el.z_vertex((i + 1) % n)});
  return out;
}

// Coefficients of v.n on local edge i in the edge monomial basis, given unit
// edge moment vector e_l: the inverse of the scaled edge mass matrix.
Matrix edge_mass_inverse(int k) {
  Matrix m(k + 1, k + 1);
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) {
      const int p = i + j;
      m(i, j) = (p % 2 == 1) ? 0.0 : 2.0 * std::pow(0.5, p + 1) / (p + 1);
    }
  return m.inverse();
}

}  // namespace

Matrix z_dofs_of_polynomials(const LocalElement& el) {
  const int k = el.k;
  const MonomialBasis b = el.basis(k + 1);
  const int n = el.num_vertices();
  Matrix d = Matrix::Zero(el.counts().nZ, b.size());
  for (int i = 0; i < n; ++i) d.row(el.z_vertex(i)) = b.values(el.vertices[i]).transpose();
  const Rule1D gl = gauss_lobatto(k + 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      d.row(el.z_edge_node(i, j)) = b.values(el.edge_point(i, gl.nodes[j + 1])).transpose();
  const MonomialBasis low = el.basis(k - 1);
  for (int g = 0; g < poly_dim(k - 1); ++g)
    for (int a = 0; a < b.size(); ++a) {
      const auto& ea = b.exponent(a);
      const auto& eg = low.exponent(g);
      d(el.z_moment(g), a) = el.monomial_integral(ea[0] + eg[0], ea[1] + eg[1]) / el.area();
    }
  return d;
}

Matrix v_dofs_of_polynomials(const LocalElement& el) {
  const int k = el.k;
  const int nk = poly_dim(k);
  const MonomialBasis b = el.basis(k);
  const int n = el.num_vertices();
  const double h = el.diameter();
  Matrix d = Matrix::Zero(el.counts().nV, 2 * nk);
  const Rule1D g = gauss_legendre(k + 2);
  for (int i = 0; i < n; ++i) {
    const Vec2 nrm = el.outward_normal(i);
    for (std::size_t q = 0; q < g.size(); ++q) {
      const Vector m = b.values(el.edge_point(i, g.nodes[q]));
      for (int l = 0; l <= k; ++l) {
        const double w = g.weights[q] * el.edge_monomial(i, l, g.nodes[q]);
        for (int a = 0; a < nk; ++a) {
          d(el.v_edge(i, l), a) += w * m(a) * nrm.x();
          d(el.v_edge(i, l), nk + a) += w * m(a) * nrm.y();
        }
      }
    }
  }
  const double root_area = std::sqrt(el.area());
  for (int beta = 1; beta < nk; ++beta) {
    const auto& eb = b.exponent(beta);
    for (int a = 0; a < nk; ++a) {
      const auto& ea = b.exponent(a);
      // div(m_a e_x) = (a1/h) m_{a-e1}; div(m_a e_y) = (a2/h) m_{a-e2}.
      if (ea[0] > 0)
        d(el.v_div(beta), a) = ea[0] / h * el.monomial_integral(ea[0] - 1 + eb[0], ea[1] + eb[1]) / root_area;
      if (ea[1] > 0)
        d(el.v_div(beta), nk + a) = ea[1] / h * el.monomial_integral(ea[0] + eb[0], ea[1] - 1 + eb[1]) / root_area;
    }
  }
  const MonomialBasis low = el.basis(k - 1);
  for (int gi = 0; gi < poly_dim(k - 1); ++gi) {
    const auto& eg = low.exponent(gi);
    for (int a = 0; a < nk; ++a) {
      const auto& ea = b.exponent(a);
      // x^perp (scaled) = (m_(0,1), -m_(1,0)).
      d(el.v_rot(gi), a) = el.monomial_integral(ea[0] + eg[0], ea[1] + eg[1] + 1) / el.area();
      d(el.v_rot(gi), nk + a) = -el.monomial_integral(ea[0] + eg[0] + 1, ea[1] + eg[1]) / el.area();
    }
  }
  return d;
}

Matrix compute_pinabla(const LocalElement& el) {
  const int k = el.k;
  const MonomialBasis b = el.basis(k + 1);
  const int nb = b.size();
  const int nz = el.counts().nZ;
  const int n = el.num_vertices();
  const double h = el.diameter();

  double perimeter = 0.0;
  for (int i = 0; i < n; ++i) perimeter += el.edge_length(i);

  Matrix g = Matrix::Zero(nb, nb);
  Matrix rhs = Matrix::Zero(nb, nz);
  // Row 0 fixes the boundary mean.
  for (int i = 0; i < n; ++i)
    for (const EdgeNode& node : edge_nodes(el, i)) {
      const Vector m = b.values(el.edge_point(i, node.s));
      g.row(0) += node.w / perimeter * m.transpose();
      rhs(0, node.dof) += node.w / perimeter;
    }
  for (int a = 1; a < nb; ++a) {
    const auto& ea = b.exponent(a);
    for (int c = 1; c < nb; ++c) {
      const auto& ec = b.exponent(c);
      double v = 0.0;
      if (ea[0] > 0 && ec[0] > 0)
        v += ea[0] * ec[0] * el.monomial_integral(ea[0] + ec[0] - 2, ea[1] + ec[1]);
      if (ea[1] > 0 && ec[1] > 0)
        v += ea[1] * ec[1] * el.monomial_integral(ea[0] + ec[0], ea[1] + ec[1] - 2);
      g(a, c) = v / (h * h);
    }
    // -(z, Laplacian m_a) through the interior moments.
    if (ea[0] >= 2) {
      const int j = MonomialBasis::index(ea[0] - 2, ea[1]);
      rhs(a, el.z_moment(j)) -= ea[0] * (ea[0] - 1) / (h * h) * el.area();
    }
    if (ea[1] >= 2) {
      const int j = MonomialBasis::index(ea[0], ea[1] - 2);
      rhs(a, el.z_moment(j)) -= ea[1] * (ea[1] - 1) / (h * h) * el.area();
    }
  }
  // + (z, dm_a/dn) on the boundary, exact by Gauss-Lobatto.
  for (int i = 0; i < n; ++i) {
    const Vec2 nrm = el.outward_normal(i);
    for (const EdgeNode& node : edge_nodes(el, i)) {
      const auto grad = b.gradients(el.edge_point(i, node.s));
      for (int a = 1; a < nb; ++a) rhs(a, node.dof) += node.w * (grad(0, a) * nrm.x() + grad(1, a) * nrm.y());
    }
  }
  return solve_local(g, rhs, el, "Pi^nabla");
}

Matrix compute_pi0_scalar(const LocalElement& el, const Matrix& pinabla) {
  const int k = el.k;
  const Matrix h = el.mass_matrix(k + 1);
  const int nb = static_cast<int>(h.rows());
  const int nlow = poly_dim(k - 1);
  const Matrix hp = h * pinabla;
  Matrix rhs = Matrix::Zero(nb, pinabla.cols());
  for (int a = 0; a < nlow; ++a) rhs(a, el.z_moment(a)) = el.area();
  if (nb > nlow) {
    // Moments against the L2-complement of P_{k-1} come from Pi^nabla; the
    // P_{k-1} part of each higher monomial comes from the DOFs.
    Matrix coeff = Matrix::Zero(nlow, nb - nlow);
    if (nlow > 0)
      coeff = solve_local(h.topLeftCorner(nlow, nlow), h.topRightCorner(nlow, nb - nlow), el, "P_{k-1} mass");
    for (int a = nlow; a < nb; ++a) {
      rhs.row(a) = hp.row(a);
      for (int j = 0; j < nlow; ++j) {
        rhs(a, el.z_moment(j)) += coeff(j, a - nlow) * el.area();
        rhs.row(a) -= coeff(j, a - nlow) * hp.row(j);
      }
    }
  }
  return solve_local(h, rhs, el, "Pi^0_{k+1}");
}

Matrix compute_pi0_grad(const LocalElement& el) {
  const int k = el.k;
  const int nk = poly_dim(k);
  const MonomialBasis b = el.basis(k);
  const int nz = el.counts().nZ;
  const int n = el.num_vertices();
  const double h = el.diameter();
  const Matrix hk = el.mass_matrix(k);

  Matrix rhs = Matrix::Zero(2 * nk, nz);
  for (int a = 0; a < nk; ++a) {
    const auto& ea = b.exponent(a);
    // -(z, d m_a / dx_d) through the interior moments.
    if (ea[0] > 0) rhs(a, el.z_moment(MonomialBasis::index(ea[0] - 1, ea[1]))) -= ea[0] / h * el.area();
    if (ea[1] > 0) rhs(nk + a, el.z_moment(MonomialBasis::index(ea[0], ea[1] - 1))) -= ea[1] / h * el.area();
  }
  for (int i = 0; i < n; ++i) {
    const Vec2 nrm = el.outward_normal(i);
    for (const EdgeNode& node : edge_nodes(el, i)) {
      const Vector m = b.values(el.edge_point(i, node.s));
      for (int a = 0; a < nk; ++a) {
        rhs(a, node.dof) += node.w * m(a) * nrm.x();
        rhs(nk + a, node.dof) += node.w * m(a) * nrm.y();
      }
    }
  }
  Matrix mass = Matrix::Zero(2 * nk, 2 * nk);
  mass.topLeftCorner(nk, nk) = hk;
  mass.bottomRightCorner(nk, nk) = hk;
  return solve_local(mass, rhs, el, "Pi^0_k grad");
}

Matrix compute_divergence_map(const LocalElement& el) {
  const int k = el.k;
  const int nk = poly_dim(k);
  const int nv = el.counts().nV;
  Matrix rhs = Matrix::Zero(nk, nv);
  for (int i = 0; i < el.num_vertices(); ++i) rhs(0, el.v_edge(i, 0)) = el.edge_length(i);
  const double root_area = std::sqrt(el.area());
  for (int a = 1; a < nk; ++a) rhs(a, el.v_div(a)) = root_area;
  return solve_local(el.mass_matrix(k), rhs, el, "divergence");
}

Matrix compute_pi0_vector_V(const LocalElement& el, const Matrix& divergence) {
  const int k = el.k;
  const int nk = poly_dim(k);
  const int nv = el.counts().nV;
  const int n = el.num_vertices();
  const double h = el.diameter();
  const MonomialBasis bk1 = el.basis(k + 1);
  const MonomialBasis bk = el.basis(k);
  const MonomialBasis blow = el.basis(k - 1);

  // Spanning set of [P_k]^2: h grad m_beta (1 <= |beta| <= k+1) and
  // x^perp m_gamma (|gamma| <= k-1), both written as vector polynomials.
  struct VecPoly {
    // (coefficient, exponent) pairs per component.
    std::vector<std::pair<double, std::array<int, 2>>> x, y;
  };
  std::vector<VecPoly> span;
  std::vector<int> span_beta;
  for (int beta = 1; beta < bk1.size(); ++beta) {
    const auto& e = bk1.exponent(beta);
    VecPoly p;
    if (e[0] > 0) p.x.push_back({double(e[0]), {e[0] - 1, e[1]}});
    if (e[1] > 0) p.y.push_back({double(e[1]), {e[0], e[1] - 1}});
    span.push_back(p);
    span_beta.push_back(beta);
  }
  for (int gi = 0; gi < blow.size(); ++gi) {
    const auto& e = blow.exponent(gi);
    VecPoly p;
    p.x.push_back({1.0, {e[0], e[1] + 1}});
    p.y.push_back({-1.0, {e[0] + 1, e[1]}});
    span.push_back(p);
    span_beta.push_back(-1 - gi);
  }

  Matrix g = Matrix::Zero(2 * nk, 2 * nk);
  for (int i = 0; i < 2 * nk; ++i)
    for (int a = 0; a < nk; ++a) {
      const auto& ea = bk.exponent(a);
      for (const auto& [c, e] : span[i].x) g(i, a) += c * el.monomial_integral(e[0] + ea[0], e[1] + ea[1]);
      for (const auto& [c, e] : span[i].y) g(i, nk + a) += c * el.monomial_integral(e[0] + ea[0], e[1] + ea[1]);
    }

  Matrix rhs = Matrix::Zero(2 * nk, nv);
  const Matrix emass_inv = edge_mass_inverse(k);
  const Rule1D gauss = gauss_legendre(k + 2);
  for (int i = 0; i < 2 * nk; ++i) {
    if (span_beta[i] < 0) {
      rhs(i, el.v_rot(-1 - span_beta[i])) = el.area();
      continue;
    }
    const auto& eb = bk1.exponent(span_beta[i]);
    // h [ -(div v, m_beta) + (v.n, m_beta)_boundary ]
    for (int a = 0; a < nk; ++a) {
      const auto& ea = bk.exponent(a);
      const double mab = el.monomial_integral(ea[0] + eb[0], ea[1] + eb[1]);
      rhs.row(i) -= h * mab * divergence.row(a);
    }
    for (int e = 0; e < n; ++e) {
      const double len = el.edge_length(e);
      for (std::size_t q = 0; q < gauss.size(); ++q) {
        const double s = gauss.nodes[q];
        const double m = bk1.values(el.edge_point(e, s))(span_beta[i]);
        for (int l = 0; l <= k; ++l) {
          double trace = 0.0;  // value of v.n at s for unit dof l
          for (int lp = 0; lp <= k; ++lp) trace += emass_inv(lp, l) * el.edge_monomial(e, lp, s);
          rhs(i, el.v_edge(e, l)) += h * len * gauss.weights[q] * trace * m;
        }
      }
    }
  }
  return solve_local(g, rhs, el, "vector Pi^0_k");
}

ElementOperators build_element_operators(const LocalElement& el) {
  ElementOperators ops;
  ops.element = el;
  ops.pinabla = compute_pinabla(el);
  ops.pi0 = compute_pi0_scalar(el, ops.pinabla);
  ops.pi0_grad = compute_pi0_grad(el);
  ops.divergence = compute_divergence_map(el);
  ops.pi0_vec = compute_pi0_vector_V(el, ops.divergence);
  ops.z_dofs_of_monomials = z_dofs_of_polynomials(el);
  ops.v_dofs_of_monomials = v_dofs_of_polynomials(el);
  ops.mass = el.mass_matrix(el.k + 1);
  return ops;
}

std::vector<ElementOperators> build_element_operators(const Mesh& mesh, int k) {
  require_supported_degree(k);
  std::vector<ElementOperators> out;
  out.reserve(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) out.push_back(build_element_operators(LocalElement::from_mesh(mesh, c, k)));
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation

Vector local_interpolate_scalar(const LocalElement& el, const ScalarFunction& f, int order) {
  const int k = el.k;
  const int n = el.num_vertices();
  Vector d = Vector::Zero(el.counts().nZ);
  for (int i = 0; i < n; ++i) d(el.z_vertex(i)) = f(el.vertices[i]);
  const Rule1D gl = gauss_lobatto(k + 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) d(el.z_edge_node(i, j)) = f(el.edge_point(i, gl.nodes[j + 1]));
  if (k > 0) {
    const MonomialBasis low = el.basis(k - 1);
    for (const auto& qp : quadrature_points(el.vertices, order))
      d.segment(el.z_moment(0), low.size()) += qp.w * f(qp.x) * low.values(qp.x) / el.area();
  }
  return d;
}

Vector local_interpolate_velocity(const LocalElement& el, const VectorFunction& f, int order) {
  const int k = el.k;
  const int nk = poly_dim(k);
  const int n = el.num_vertices();
  Vector d = Vector::Zero(el.counts().nV);
  const Rule1D g = gauss_legendre(gauss_points_for_degree(order));
  const MonomialBasis bk = el.basis(k);
  Vector boundary_flux = Vector::Zero(nk);  // integral of (F.n) m_a over the boundary
  for (int i = 0; i < n; ++i) {
    const Vec2 nrm = el.outward_normal(i);
    const double len = el.edge_length(i);
    for (std::size_t q = 0; q < g.size(); ++q) {
      const Vec2 x = el.edge_point(i, g.nodes[q]);
      const double fn = f(x).dot(nrm);
      for (int l = 0; l <= k; ++l) d(el.v_edge(i, l)) += g.weights[q] * fn * el.edge_monomial(i, l, g.nodes[q]);
      boundary_flux += len * g.weights[q] * fn * bk.values(x);
    }
  }
  if (nk > 1 || k > 0) {
    const auto qps = quadrature_points(el.vertices, order);
    const double root_area = std::sqrt(el.area());
    // (div F, m_a) = (F.n, m_a)_boundary - (F, grad m_a).
    Vector div_moments = boundary_flux;
    for (const auto& qp : qps) {
      const Vec2 fx = f(qp.x);
      const auto grad = bk.gradients(qp.x);
      for (int a = 0; a < nk; ++a) div_moments(a) -= qp.w * (fx.x() * grad(0, a) + fx.y() * grad(1, a));
    }
    for (int a = 1; a < nk; ++a) d(el.v_div(a)) = div_moments(a) / root_area;
    const MonomialBasis low = el.basis(k - 1);
    const double h = el.diameter();
    for (const auto& qp : qps) {
      const Vec2 fx = f(qp.x);
      const Vec2 xp = (qp.x - el.centroid()) / h;
      const double fperp = fx.x() * xp.y() - fx.y() * xp.x();
      const Vector m = low.values(qp.x);
      for (int j = 0; j < low.size(); ++j) d(el.v_rot(j)) += qp.w * fperp * m(j) / el.area();
    }
  }
  return d;
}

Vector interpolate_scalar(const Mesh& mesh, const DofMap& dofs, const ScalarFunction& f, int order) {
  Vector out = Vector::Zero(dofs.num_z());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement el = LocalElement::from_mesh(mesh, c, dofs.k());
    const Vector local = local_interpolate_scalar(el, f, order);
    const auto& map = dofs.z_dofs(c);
    for (int i = 0; i < local.size(); ++i) out(map[i]) = local(i);
  }
  return out;
}

Vector interpolate_velocity(const Mesh& mesh, const DofMap& dofs, const VectorFunction& f, int order) {
  Vector out = Vector::Zero(dofs.num_v());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const LocalElement el = LocalElement::from_mesh(mesh, c, dofs.k());
    const Vector local = local_interpolate_velocity(el, f, order);
    const auto& map = dofs.v_dofs(c);
    const auto& sign = dofs.v_signs(c);
    for (int i = 0; i < local.size(); ++i) {
      // Shared edge DOFs are taken from the edge's left cell.
      if (i < el.num_vertices() * (el.k + 1)) {
        const int e = mesh.cell_edges(c)[i / (el.k + 1)];
        if (mesh.edge(e).left != c) continue;
      }
      out(map[i]) = sign[i] * local(i);
    }
  }
  return out;
}

}  // namespace vemflow
