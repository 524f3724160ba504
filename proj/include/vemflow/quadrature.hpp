#pragma once

#include <vector>

#include "vemflow/types.hpp"

namespace vemflow {

/// One-dimensional rule on the reference interval [0, 1].
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [0, 1]; exact for degree 2n-1.
Rule1D gauss_legendre(int n);

/// n-point Gauss-Lobatto rule on [0, 1] (n >= 2, endpoints included);
/// exact for degree 2n-3.
Rule1D gauss_lobatto(int n);

/// Smallest Gauss-Legendre rule exact for polynomials of the given degree.
inline int gauss_points_for_degree(int degree) { return degree < 1 ? 1 : (degree + 2) / 2; }

/// Rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
struct TriangleRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
};

/// Collapsed-coordinate (Duffy) Gauss rule with positive weights, exact for
/// polynomials of total degree <= order.
const TriangleRule& triangle_rule(int order);

}  // namespace vemflow
