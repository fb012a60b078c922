#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dctmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad dimensions or parameters supplied by the caller.
class ArgumentError : public Error { using Error::Error; };
// Non-finite or malformed data.
class DataError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class DecompositionError : public Error { using Error::Error; };
class SolverError : public Error { using Error::Error; };
class LdiError : public Error { using Error::Error; };
class TerminalDesignError : public Error { using Error::Error; };
class TubeError : public Error { using Error::Error; };
class InitializationError : public Error { using Error::Error; };
class RestorationError : public Error { using Error::Error; };
// The controller could not start: the first subproblem is infeasible.
class SetupError : public Error { using Error::Error; };

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

// Axis-aligned box used for sampling and constraint sets.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double tol = 0.0) const {
    return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
  }
  // Largest distance outside the box along any coordinate, 0 inside.
  double violation(const Vec& x) const {
    return std::max(0.0, std::max((lo - x).maxCoeff(), (x - hi).maxCoeff()));
  }
  Vec center() const { return 0.5 * (lo + hi); }
  Vec half_width() const { return 0.5 * (hi - lo); }
  static Box symmetric(const Vec& half) { return {-half, half}; }
};

}  // namespace dctmpc
