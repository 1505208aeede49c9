#pragma once

// Reference computations used only by the tests. None of them call into the
// library's solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd M(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) M(r, c) = u(rng);
  return M;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  return random_matrix(rng, n, 1, lo, hi).col(0);
}

/// Cyclic Jacobi rotations; returns the eigenvalues in ascending order.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd A) {
  const int n = static_cast<int>(A.rows());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (int k = 0; k < n; ++k) ev[k] = A(k, k);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Accelerated projected gradient with step 1/L on a box, stopped once the
/// natural residual ||x - clip(x - grad)|| is below tol.
inline Eigen::VectorXd projected_gradient_box(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                              double tol = 1e-13, int max_iter = 2000000) {
  const double L = jacobi_eigenvalues(H).back();
  auto clip = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(v.cwiseMax(lo).cwiseMin(hi)); };
  Eigen::VectorXd x = clip(Eigen::VectorXd::Zero(g.size()));
  Eigen::VectorXd y = x;
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd next = clip(y - (H * y + g) / L);
    if ((next - clip(next - (H * next + g))).norm() < tol) return next;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if ((y - next).dot(next - x) > 0) {
      // momentum points uphill: restart
      t = 1.0;
      y = next;
    } else {
      y = next + ((t - 1.0) / tn) * (next - x);
      t = tn;
    }
    x = next;
  }
  return x;
}

/// Exact minimizer of 1/2 x'Hx + g'x over {C x <= d} for tiny problems by
/// enumerating active sets (H positive definite).
inline std::optional<Eigen::VectorXd> enumerate_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                                   const Eigen::MatrixXd& C, const Eigen::VectorXd& d) {
  const int m = static_cast<int>(C.rows());
  const int n = static_cast<int>(H.rows());
  std::optional<Eigen::VectorXd> best;
  double best_val = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int r = 0; r < m; ++r)
      if (mask & (1u << r)) act.push_back(r);
    if (static_cast<int>(act.size()) > n) continue;
    const int k = static_cast<int>(act.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -g;
    for (int a = 0; a < k; ++a) {
      K.block(0, n + a, n, 1) = C.row(act[a]).transpose();
      K.block(n + a, 0, 1, n) = C.row(act[a]);
      rhs[n + a] = d[act[a]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rank() < n + k) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    if (((C * x - d).array() > 1e-10).any()) continue;
    if ((sol.tail(k).array() < -1e-10).any()) continue;
    const double val = 0.5 * x.dot(H * x) + g.dot(x);
    if (val < best_val) {
      best_val = val;
      best = x;
    }
  }
  return best;
}

/// Ridge regression by normal equations.
inline Eigen::VectorXd ridge(const Eigen::MatrixXd& Phi, const Eigen::VectorXd& y, double alpha) {
  const Eigen::MatrixXd M = Phi.transpose() * Phi + Eigen::MatrixXd::Identity(Phi.cols(), Phi.cols()) / alpha;
  return M.ldlt().solve(Phi.transpose() * y);
}

/// Golden-section minimization of a unimodal scalar function.
inline double golden_min(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  while (b - a > tol) {
    if (f(c) < f(d)) b = d;
    else a = c;
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace oracle
