#pragma once

#include <Eigen/Dense>

#include "statseek/profiles.hpp"
#include "statseek/qp.hpp"

namespace statseek {

/// Euclidean projection onto omega: argmin_y ||y - x||^2 over the polytope.
/// Pure boxes reduce to clipping; anything else is solved as a strictly
/// convex QP. Throws InfeasibleError("empty feasible set") if omega is empty.
inline Eigen::VectorXd project(const Polytope& omega, const Eigen::VectorXd& x,
                               const QpOptions& opts = {}) {
  detail::require_dims(x.size() == omega.dim(), "point vs polytope");
  if (omega.is_box()) return omega.clip(x);
  if (omega.violation(x) <= 0.0) return x;
  const int n = omega.dim();
  try {
    return qp_solve(Eigen::MatrixXd::Identity(n, n), -x, omega, 0.0, opts).x;
  } catch (const InfeasibleError&) {
    throw InfeasibleError("empty feasible set");
  }
}

}  // namespace statseek
