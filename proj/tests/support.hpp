#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "vemflow/mesh.hpp"

namespace testing_support {

using vemflow::Vec2;

// Random polygon generator for property tests. Vertices sit on a perturbed
// circle at sorted angles with a minimum angular gap, so every polygon is
// star-shaped from the origin with edges bounded away from zero length.
// `convex` keeps radii equal so the result is convex.
inline std::vector<Vec2> random_polygon(std::mt19937_64& rng, bool convex, int min_n = 3, int max_n = 9) {
  std::uniform_int_distribution<int> count(min_n, max_n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = count(rng);
  const double two_pi = 2.0 * std::numbers::pi;
  const double gap = 0.35 * two_pi / n;
  // Angles: uniform spacing with jitter keeps consecutive gaps >= gap.
  std::vector<double> theta(n);
  const double slack = two_pi / n - gap;
  const double start = unit(rng) * two_pi;
  double acc = start;
  std::vector<double> extra(n);
  double total = 0.0;
  for (double& e : extra) total += (e = unit(rng));
  for (int i = 0; i < n; ++i) {
    theta[i] = acc;
    acc += gap + slack * n * extra[i] / total;
  }
  const double scale = 0.2 + 3.0 * unit(rng);
  const Vec2 shift(unit(rng) * 10.0 - 5.0, unit(rng) * 10.0 - 5.0);
  const double aspect = 0.6 + 0.8 * unit(rng);
  std::vector<Vec2> poly(n);
  for (int i = 0; i < n; ++i) {
    const double r = convex ? 1.0 : 0.75 + 0.25 * unit(rng);
    poly[i] = shift + scale * Vec2(aspect * r * std::cos(theta[i]), r * std::sin(theta[i]));
  }
  return poly;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testing_support
