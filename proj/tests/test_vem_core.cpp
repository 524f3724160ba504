#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vemflow/errors.hpp"
#include "vemflow/vem_core.hpp"

using namespace vemflow;

namespace {

std::vector<Vec2> unit_square_poly() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

// Polynomial in the cell's scaled monomials with random coefficients.
struct RandomPoly {
  MonomialBasis basis;
  Vector coeff;
  double operator()(const Vec2& x) const { return eval_poly(basis, coeff, x); }
};

double coeff_error(const Vector& got, const Vector& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace

TEST_CASE("local dof counts") {
  CHECK(local_dof_counts(4, 0) == LocalDofCounts{4, 4, 1});
  CHECK(local_dof_counts(4, 1) == LocalDofCounts{9, 11, 3});
  CHECK(local_dof_counts(5, 0) == LocalDofCounts{5, 5, 1});
  CHECK_THROWS_AS(require_supported_degree(2), UnsupportedDegree);
  CHECK_THROWS_AS(LocalElement::from_polygon(unit_square_poly(), 2), UnsupportedDegree);
}

TEST_CASE("monomial basis ordering and values") {
  const MonomialBasis b({0.5, 0.5}, 2.0, 2);
  CHECK(b.size() == 6);
  CHECK(MonomialBasis::index(0, 0) == 0);
  CHECK(MonomialBasis::index(1, 0) == 1);
  CHECK(MonomialBasis::index(0, 1) == 2);
  CHECK(MonomialBasis::index(2, 0) == 3);
  CHECK(MonomialBasis::index(1, 1) == 4);
  CHECK(MonomialBasis::index(0, 2) == 5);
  for (int i = 0; i < b.size(); ++i) CHECK(MonomialBasis::index(b.exponent(i)[0], b.exponent(i)[1]) == i);
  const Vector v = b.values({1.5, 0.0});
  CHECK(v(1) == doctest::Approx(0.5));
  CHECK(v(2) == doctest::Approx(-0.25));
  CHECK(v(4) == doctest::Approx(-0.125));
  const auto g = b.gradients({1.5, 0.0});
  CHECK(g(0, 3) == doctest::Approx(2 * 0.5 / 2.0));
  CHECK(g(1, 4) == doctest::Approx(0.5 / 2.0));
}

TEST_CASE("pinabla on the unit square, k=0") {
  const LocalElement el = LocalElement::from_polygon(unit_square_poly(), 0);
  const Matrix p = compute_pinabla(el);
  const double h = el.diameter();
  // Hat function at (0,0): gradient (-1/2, -1/2), boundary mean 1/4.
  const Vector c = p.col(0);
  CHECK(c(0) == doctest::Approx(0.25));
  CHECK(c(1) / h == doctest::Approx(-0.5));
  CHECK(c(2) / h == doctest::Approx(-0.5));
  // Enhanced projector coincides with pinabla for k=0.
  const Matrix p0 = compute_pi0_scalar(el, p);
  CHECK((p0 - p).norm() < 1e-13);
  // Constant and linear functions.
  const Vector one = Vector::Ones(4);
  const Vector r1 = p * one;
  CHECK(r1(0) == doctest::Approx(1.0));
  CHECK(std::abs(r1(1)) < 1e-14);
  CHECK(std::abs(r1(2)) < 1e-14);
}

TEST_CASE("pi0 hat function on square against a hand moment system") {
  // For k=0 the enhanced space fixes all P1 moments through pinabla; the
  // L2 projection of the hat must therefore be the pinabla polynomial, which
  // at the vertex (0,0) takes 1/4 + 1/4 + 1/4.
  const LocalElement el = LocalElement::from_polygon(unit_square_poly(), 0);
  const ElementOperators ops = build_element_operators(el);
  const Vector c = ops.pi0.col(0);
  CHECK(eval_poly(el.basis(1), c, {0, 0}) == doctest::Approx(0.75));
  CHECK(eval_poly(el.basis(1), c, {1, 1}) == doctest::Approx(-0.25));
}

TEST_CASE("scalar interpolation of constants and vertex data") {
  for (int k : {0, 1}) {
    const LocalElement el = LocalElement::from_polygon({{0, 0}, {2, 0}, {2.5, 1}, {1, 2}, {-0.5, 1}}, k);
    const Vector d = local_interpolate_scalar(el, [](const Vec2&) { return 1.0; });
    for (int i = 0; i < el.num_vertices() * (k + 1); ++i) CHECK(d(i) == doctest::Approx(1.0));
    if (k == 1) CHECK(d(el.z_moment(0)) == doctest::Approx(1.0));
  }
}

TEST_CASE("velocity interpolation: constant field on unit square") {
  const LocalElement el = LocalElement::from_polygon(unit_square_poly(), 0);
  const Vector d = local_interpolate_velocity(el, [](const Vec2&) { return Vec2(1.0, 0.0); });
  REQUIRE(d.size() == 4);
  CHECK(std::abs(d(0)) < 1e-15);
  CHECK(d(1) == doctest::Approx(1.0));
  CHECK(std::abs(d(2)) < 1e-15);
  CHECK(d(3) == doctest::Approx(-1.0));
  const ElementOperators ops = build_element_operators(el);
  const Vector p = ops.pi0_vec * d;
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(std::abs(p(1)) < 1e-14);
}

TEST_CASE("vector projection reproduces the scaled position field at k=1") {
  const LocalElement el = LocalElement::from_polygon({{0, 0}, {1.2, 0.1}, {1.4, 1.0}, {0.3, 1.3}}, 1);
  const Vec2 xe = el.centroid();
  const double h = el.diameter();
  const Vector d = local_interpolate_velocity(el, [&](const Vec2& x) -> Vec2 { return (x - xe) / h; });
  const ElementOperators ops = build_element_operators(el);
  const Vector p = ops.pi0_vec * d;
  Vector want = Vector::Zero(6);
  want(1) = 1.0;  // x-component: m_(1,0)
  want(3 + 2) = 1.0;  // y-component: m_(0,1)
  CHECK(coeff_error(p, want) < 1e-12);
}

TEST_CASE("gradient projector: linear, constant and quadratic inputs") {
  const std::vector<Vec2> poly = {{0, 0}, {1, 0}, {1.5, 0.8}, {0.6, 1.4}, {-0.3, 0.7}};
  for (int k : {0, 1}) {
    const LocalElement el = LocalElement::from_polygon(poly, k);
    const ElementOperators ops = build_element_operators(el);
    const int nk = poly_dim(k);
    const Vector one = local_interpolate_scalar(el, [](const Vec2&) { return 1.0; });
    CHECK((ops.pi0_grad * one).norm() < 1e-12);
    const Vector lin = local_interpolate_scalar(el, [](const Vec2& x) { return 3.0 * x.x() - 2.0 * x.y() + 1.0; });
    const Vector g = ops.pi0_grad * lin;
    CHECK(g(0) == doctest::Approx(3.0));
    CHECK(g(nk) == doctest::Approx(-2.0));
    for (int i = 1; i < nk; ++i) {
      CHECK(std::abs(g(i)) < 1e-12);
      CHECK(std::abs(g(nk + i)) < 1e-12);
    }
    if (k == 1) {
      // z = m_(2,0): gradient (2/h) m_(1,0) in x, zero in y.
      const MonomialBasis b = el.basis(2);
      const Vector q = local_interpolate_scalar(el, [&](const Vec2& x) { return b.values(x)(3); });
      const Vector gq = ops.pi0_grad * q;
      Vector want = Vector::Zero(6);
      want(1) = 2.0 / el.diameter();
      CHECK(coeff_error(gq, want) < 1e-12);
    }
  }
}

TEST_CASE("divergence map reproduces the divergence moments") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int k : {0, 1}) {
    for (int trial = 0; trial < 10; ++trial) {
      const LocalElement el = LocalElement::from_polygon(testing_support::random_polygon(rng, trial % 2 == 0), k);
      const Matrix div = compute_divergence_map(el);
      Vector v(el.counts().nV);
      for (int i = 0; i < v.size(); ++i) v(i) = n01(rng);
      const Vector d = div * v;
      const Matrix h = el.mass_matrix(k);
      const Vector moments = h * d;
      double flux = 0.0;
      for (int i = 0; i < el.num_vertices(); ++i) flux += el.edge_length(i) * v(el.v_edge(i, 0));
      CHECK(moments(0) == doctest::Approx(flux).epsilon(1e-12));
      for (int a = 1; a < poly_dim(k); ++a)
        CHECK(moments(a) / std::sqrt(el.area()) == doctest::Approx(v(el.v_div(a))).epsilon(1e-12));
    }
  }
}

TEST_CASE("pinabla orthogonality against an independent k=0 boundary formula") {
  // For linear m, (grad z, grad m) = boundary integral of z dm/dn, which the
  // trapezoid rule evaluates exactly for piecewise-linear traces.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const auto poly = testing_support::random_polygon(rng, trial % 2 == 0);
    const LocalElement el = LocalElement::from_polygon(poly, 0);
    const Matrix p = compute_pinabla(el);
    const int n = el.num_vertices();
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = n01(rng);
    const Vector c = p * z;
    const Vec2 grad_pi(c(1) / el.diameter(), c(2) / el.diameter());
    Vec2 rhs = Vec2::Zero();  // (grad z, e_d) for d = x, y
    double bmean = 0.0, perimeter = 0.0;
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      const double len = (poly[j] - poly[i]).norm();
      rhs += 0.5 * (z(i) + z(j)) * len * el.outward_normal(i);
      bmean += 0.5 * (z(i) + z(j)) * len;
      perimeter += len;
    }
    CHECK((el.area() * grad_pi - rhs).norm() < 1e-11 * std::max(1.0, rhs.norm()));
    // Boundary mean of the projection equals that of z.
    double pmean = 0.0;
    const MonomialBasis b = el.basis(1);
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      pmean += 0.5 * (eval_poly(b, c, poly[i]) + eval_poly(b, c, poly[j])) * (poly[j] - poly[i]).norm();
    }
    CHECK(pmean == doctest::Approx(bmean).epsilon(1e-11));
  }
}

TEST_CASE("property: interpolate-then-project reproduces polynomials on random polygons") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n01;
  for (int k : {0, 1}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto poly = testing_support::random_polygon(rng, trial % 3 != 0);
      const LocalElement el = LocalElement::from_polygon(poly, k);
      const ElementOperators ops = build_element_operators(el);
      const MonomialBasis bk1 = el.basis(k + 1);
      const MonomialBasis bk = el.basis(k);
      for (int a = 0; a < bk1.size(); ++a) {
        const Vector dofs = local_interpolate_scalar(el, [&](const Vec2& x) { return bk1.values(x)(a); });
        Vector e = Vector::Zero(bk1.size());
        e(a) = 1.0;
        CHECK(coeff_error(ops.pinabla * dofs, e) < 1e-10);
        CHECK(coeff_error(ops.pi0 * dofs, e) < 1e-10);
        CHECK(coeff_error(dofs, ops.z_dofs_of_monomials.col(a)) < 1e-10);
        const auto grad = bk1.gradients(el.centroid());
        (void)grad;
      }
      // Gradient projector of a random P_{k+1} polynomial.
      RandomPoly p{bk1, Vector::NullaryExpr(bk1.size(), [&]() { return n01(rng); })};
      const Vector dofs = local_interpolate_scalar(el, p);
      const Vector g = ops.pi0_grad * dofs;
      // Exact gradient coefficients: differentiate term by term.
      Vector want = Vector::Zero(2 * bk.size());
      for (int a = 0; a < bk1.size(); ++a) {
        const auto e = bk1.exponent(a);
        if (e[0] > 0) want(MonomialBasis::index(e[0] - 1, e[1])) += e[0] * p.coeff(a) / el.diameter();
        if (e[1] > 0) want(bk.size() + MonomialBasis::index(e[0], e[1] - 1)) += e[1] * p.coeff(a) / el.diameter();
      }
      CHECK(coeff_error(g, want) < 1e-10);
      // Vector monomials.
      for (int comp = 0; comp < 2; ++comp)
        for (int a = 0; a < bk.size(); ++a) {
          const Vector dv = local_interpolate_velocity(el, [&](const Vec2& x) {
            const double m = bk.values(x)(a);
            return comp == 0 ? Vec2(m, 0.0) : Vec2(0.0, m);
          });
          Vector e = Vector::Zero(2 * bk.size());
          e(comp * bk.size() + a) = 1.0;
          CHECK(coeff_error(ops.pi0_vec * dv, e) < 1e-10);
          CHECK(coeff_error(dv, ops.v_dofs_of_monomials.col(comp * bk.size() + a)) < 1e-10);
        }
    }
  }
}

TEST_CASE("pythagorean identity of the L2 projector on polynomial inputs") {
  const LocalElement el = LocalElement::from_polygon({{0, 0}, {1, 0}, {1.2, 1}, {0, 0.8}}, 1);
  const ElementOperators ops = build_element_operators(el);
  const Vector coeff = (Vector(6) << 0.3, -1.0, 2.0, 0.5, 0.1, -0.7).finished();
  const Vector dofs = ops.z_dofs_of_monomials * coeff;
  const Vector proj = ops.pi0 * dofs;
  const double full = coeff.dot(ops.mass * coeff);
  const double part = proj.dot(ops.mass * proj);
  const Vector rest = coeff - proj;
  CHECK(full == doctest::Approx(part + rest.dot(ops.mass * rest)).epsilon(1e-12));
  CHECK(rest.norm() < 1e-12);
}

TEST_CASE("global dof map consistency") {
  for (int k : {0, 1}) {
    const Mesh m = build_voronoi(30, unit_square(), 4, 2);
    const DofMap dm(m, k);
    CHECK(dm.num_q() == poly_dim(k) * m.num_cells());
    CHECK(dm.num_z() == m.num_vertices() + k * m.num_edges() + poly_dim(k - 1) * m.num_cells());
    for (int c = 0; c < m.num_cells(); ++c) {
      auto z = dm.z_dofs(c);
      std::sort(z.begin(), z.end());
      CHECK(std::adjacent_find(z.begin(), z.end()) == z.end());
      CHECK(static_cast<int>(dm.v_dofs(c).size()) == local_dof_counts(static_cast<int>(m.cell(c).size()), k).nV);
    }
    // A smooth field interpolated globally agrees with each cell's local
    // interpolation up to the edge sign.
    auto f = [](const Vec2& x) { return Vec2(std::sin(x.x() + 2 * x.y()), x.x() * x.x()); };
    const Vector global = interpolate_velocity(m, dm, f);
    for (int c = 0; c < m.num_cells(); ++c) {
      const LocalElement el = LocalElement::from_mesh(m, c, k);
      const Vector local = local_interpolate_velocity(el, f);
      for (int i = 0; i < local.size(); ++i)
        CHECK(dm.v_signs(c)[i] * global(dm.v_dofs(c)[i]) == doctest::Approx(local(i)).epsilon(1e-12));
    }
    auto s = [](const Vec2& x) { return std::exp(x.x()) * std::cos(x.y()); };
    const Vector zg = interpolate_scalar(m, dm, s);
    for (int c = 0; c < m.num_cells(); ++c) {
      const LocalElement el = LocalElement::from_mesh(m, c, k);
      const Vector local = local_interpolate_scalar(el, s);
      for (int i = 0; i < local.size(); ++i) CHECK(zg(dm.z_dofs(c)[i]) == doctest::Approx(local(i)).epsilon(1e-12));
    }
  }
}
