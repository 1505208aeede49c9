#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace statseek {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The feasible set (or an agent's reaction set) is empty.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations; the best iterate is kept.
class MaxIterationsError : public Error {
 public:
  MaxIterationsError(const std::string& what, Eigen::VectorXd best)
      : Error(what), best_iterate(std::move(best)) {}
  Eigen::VectorXd best_iterate;
};

/// Non-finite intermediate quantities in a numerical routine.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A hard run-time invariant (query feasibility, convergence implies
/// stationarity, covariance positivity) was violated.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(std::string("dimension mismatch: ") + what);
}

}  // namespace detail
}  // namespace statseek
