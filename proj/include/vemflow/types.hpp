#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <functional>

namespace vemflow {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 1.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool degenerate() const {
    return !(std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) &&
             std::isfinite(ymax)) ||
           !(xmax > xmin) || !(ymax > ymin);
  }
};

inline Rect unit_square() { return {0.0, 0.0, 1.0, 1.0}; }

/// Scalar field of space only.
using SpaceField = std::function<double(const Vec2&)>;
/// Scalar field of space and time, evaluated with the cell that contains x.
/// The cell index lets piecewise data (well densities) be represented exactly.
using CellField = std::function<double(int cell, const Vec2& x, double t)>;
using VectorSpaceTimeField = std::function<Vec2(const Vec2&, double)>;
using ScalarSpaceTimeField = std::function<double(const Vec2&, double)>;

}  // namespace vemflow
