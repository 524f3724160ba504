#pragma once

#include <stdexcept>
#include <string>

namespace vemflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied argument (counts, bounds, tags, flags).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Mesh topology or geometry violates a structural invariant.
class InvalidMesh : public Error {
 public:
  using Error::Error;
};

/// A local projector system is singular on a cell.
class IllShapedCell : public Error {
 public:
  explicit IllShapedCell(int cell, const std::string& what)
      : Error("cell " + std::to_string(cell) + ": " + what), cell_(cell) {}
  int cell() const { return cell_; }

 private:
  int cell_;
};

/// A coefficient sample is outside its admissible range.
class InvalidCoefficient : public Error {
 public:
  using Error::Error;
};

class UnsupportedDegree : public Error {
 public:
  explicit UnsupportedDegree(int k)
      : Error("unsupported polynomial degree k=" + std::to_string(k) +
              " (supported: 0, 1)"),
        degree_(k) {}
  int degree() const { return degree_; }

 private:
  int degree_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Linear solve broke down or did not reach the requested residual.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double residual)
      : Error(what + " (relative residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A time step failed; carries the step index at which the run aborted.
class SolverFailure : public Error {
 public:
  SolverFailure(int step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace vemflow
