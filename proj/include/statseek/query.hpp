#pragma once

// Query synthesis: the next query is the minimum-norm profile among the
// minimizers over Omega of the summed fixed-point residual of the current
// surrogates,
//
//   M(theta) = argmin_{y in Omega} sum_i || y_i - nu_i y_{-i} - c_i ||^2.
//
// Stacking the residuals as r(y) = R y - c gives the quadratic
// 1/2 y'H y + g'y + const with H = 2 R'R, g = -2 R'c, const = c'c.

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "statseek/errors.hpp"
#include "statseek/profiles.hpp"
#include "statseek/qp.hpp"
#include "statseek/surrogate.hpp"

namespace statseek {

inline constexpr double kDefaultEigTol = 1e-9;
inline constexpr double kDefaultTikhonovEps = 1e-8;

struct QueryProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double const_term = 0.0;
  Polytope omega;
  Partition partition;
  /// R and c of the stacked residual R y - c.
  Eigen::MatrixXd residual_map;
  Eigen::VectorXd offsets;

  double objective(const Eigen::VectorXd& y) const { return (residual_map * y - offsets).squaredNorm(); }
};

struct QueryResult {
  Eigen::VectorXd x_hat;
  double objective_value = 0.0;
  double lambda_min_H = 0.0;
  bool unique_certificate = false;
  double kkt_residual = 0.0;
};

namespace detail {

inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> stack_residual(const std::vector<AffineSurrogate>& surrogates,
                                                                   const Partition& partition) {
  detail::require_dims(static_cast<int>(surrogates.size()) == partition.agents(), "surrogates vs agents");
  const int n = partition.total();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c(n);
  for (int i = 0; i < partition.agents(); ++i) {
    const auto& s = surrogates[i];
    detail::require_dims(s.outputs() == partition.size(i), "surrogate outputs");
    detail::require_dims(s.inputs() == partition.complement_size(i), "surrogate inputs");
    const int off = partition.offset(i);
    const auto others = partition.complement_indices(i);
    const Eigen::MatrixXd nu = s.nu();
    for (int r = 0; r < s.outputs(); ++r) {
      R(off + r, off + r) = 1.0;
      for (int k = 0; k < s.inputs(); ++k) R(off + r, others[k]) -= nu(r, k);
    }
    c.segment(off, s.outputs()) = s.c();
  }
  return {std::move(R), std::move(c)};
}

}  // namespace detail

inline QueryProblem build_query_problem(const std::vector<AffineSurrogate>& surrogates, const Partition& partition,
                                        const Polytope& omega) {
  detail::require_dims(omega.dim() == partition.total(), "polytope vs partition");
  auto [R, c] = detail::stack_residual(surrogates, partition);
  QueryProblem q;
  q.H = 2.0 * R.transpose() * R;
  q.H = 0.5 * (q.H + q.H.transpose());
  q.g = -2.0 * R.transpose() * c;
  q.const_term = c.squaredNorm();
  q.omega = omega;
  q.partition = partition;
  q.residual_map = std::move(R);
  q.offsets = std::move(c);
  return q;
}

inline double lambda_min(const Eigen::MatrixXd& H) {
  detail::require_dims(H.rows() == H.cols() && H.rows() > 0, "lambda_min needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

/// Minimum-norm element of M(theta). When lambda_min(H) >= eig_tol the
/// minimizer is unique and is returned directly; otherwise the Tikhonov
/// problem (objective + eps/2 ||y||^2) stands in for the min-norm selection
/// and unique_certificate is false.
inline QueryResult min_norm_query(const QueryProblem& q, double eig_tol = kDefaultEigTol,
                                  double tikhonov_eps = kDefaultTikhonovEps, const QpOptions& opts = {}) {
  QueryResult res;
  res.lambda_min_H = lambda_min(q.H);
  res.unique_certificate = res.lambda_min_H >= eig_tol;
  const double ridge = res.unique_certificate ? 0.0 : tikhonov_eps;
  const QpSolution sol = qp_solve(q.H, q.g, q.omega, ridge, opts);
  res.x_hat = sol.x;
  res.kkt_residual = sol.kkt_residual;
  res.objective_value = q.objective(sol.x);
  return res;
}

/// Minimum-norm solution of the unconstrained fixed-point system
/// R y = c, or nullopt if the system is inconsistent.
inline std::optional<Eigen::VectorXd> solve_linear_fixed_point(const std::vector<AffineSurrogate>& surrogates,
                                                               const Partition& partition) {
  auto [R, c] = detail::stack_residual(surrogates, partition);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(R);
  Eigen::VectorXd y = cod.solve(c);
  if (!y.allFinite() || (R * y - c).norm() > 1e-8 * (1.0 + c.norm())) return std::nullopt;
  return y;
}

}  // namespace statseek
