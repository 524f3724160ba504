#include "vemflow/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "vemflow/errors.hpp"

namespace vemflow {
namespace {

// Legendre P_n and its derivative at x in [-1, 1].
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int j = 2; j <= n; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace

Rule1D gauss_legendre(int n) {
  if (n < 1) throw InvalidInput("gauss_legendre: need at least one point");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [p, dp] = legendre(n, x);
    (void)p;
    // Map from [-1, 1] to [0, 1], ascending order.
    rule.nodes[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

Rule1D gauss_lobatto(int n) {
  if (n < 2) throw InvalidInput("gauss_lobatto: need at least two points");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = n - 1;
  rule.nodes.front() = 0.0;
  rule.nodes.back() = 1.0;
  const double end_weight = 1.0 / (m * (m + 1.0));
  rule.weights.front() = end_weight;
  rule.weights.back() = end_weight;
  // Interior nodes are the roots of P'_m.
  for (int i = 1; i < m; ++i) {
    double x = -std::cos(std::numbers::pi * i / m);
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(m, x);
      // P''_m from the Legendre ODE: (1-x^2) P'' = 2x P' - m(m+1) P.
      const double d2p = (2.0 * x * dp - m * (m + 1.0) * p) / (1.0 - x * x);
      const double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [p, dp] = legendre(m, x);
    (void)dp;
    rule.nodes[i] = 0.5 * (x + 1.0);
    rule.weights[i] = end_weight / (p * p);
  }
  return rule;
}

const TriangleRule& triangle_rule(int order) {
  static std::mutex mutex;
  static std::map<int, TriangleRule> cache;
  if (order < 0) order = 0;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // The Duffy Jacobian adds one degree in the collapsed direction.
  const int n = gauss_points_for_degree(order + 1);
  const Rule1D g = gauss_legendre(n);
  TriangleRule rule;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = g.nodes[i];
      const double v = g.nodes[j];
      rule.points.emplace_back(u, v * (1.0 - u));
      rule.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - u));
    }
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

}  // namespace vemflow
