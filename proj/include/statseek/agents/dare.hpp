#pragma once

// Discrete algebraic Riccati equation
//   A'PA - A'PB (R + B'PB)^{-1} B'PA + Q = P,   P >= 0,
// solved by the structured doubling algorithm, with fixed-point refinement
// and a plain value-iteration fallback.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "statseek/errors.hpp"

namespace statseek::agents {

struct DareResult {
  Eigen::MatrixXd P;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stabilizing = false;
};

inline double spectral_radius(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Classical gain K = (R + B'PB)^{-1} B'PA; the optimal input is u = -K z.
inline Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                                const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtP = B.transpose() * P;
  return (R + BtP * B).ldlt().solve(BtP * A);
}

inline Eigen::MatrixXd riccati_map(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                                   const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd AtP = A.transpose() * P;
  const Eigen::MatrixXd AtPB = AtP * B;
  Eigen::MatrixXd next = AtP * A - AtPB * (R + B.transpose() * P * B).ldlt().solve(AtPB.transpose()) + Q;
  return 0.5 * (next + next.transpose());
}

/// Frobenius norm of the Riccati residual.
inline double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                            const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  return (riccati_map(A, B, Q, R, P) - P).norm();
}

inline DareResult dare_iterate(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R, int max_iter = 10000) {
  const Eigen::Index n = A.rows();
  detail::require_dims(A.cols() == n && B.rows() == n, "DARE A/B");
  detail::require_dims(Q.rows() == n && Q.cols() == n, "DARE Q");
  detail::require_dims(R.rows() == B.cols() && R.cols() == B.cols(), "DARE R");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  auto tolerance = [](const Eigen::MatrixXd& P) { return 1e-9 * (1.0 + P.norm()); };
  auto finish = [&](Eigen::MatrixXd P, int iters) {
    DareResult res;
    res.P = std::move(P);
    res.iterations = iters;
    res.residual = dare_residual(A, B, Q, R, res.P);
    res.converged = std::isfinite(res.residual) && res.residual <= tolerance(res.P);
    if (res.converged) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.P, Eigen::EigenvaluesOnly);
      const bool psd = es.eigenvalues()[0] >= -1e-9 * (1.0 + res.P.norm());
      res.stabilizing = psd && spectral_radius(A - B * lqr_gain(A, B, R, res.P)) < 1.0;
    }
    return res;
  };

  // Structured doubling.
  Eigen::MatrixXd Ak = A;
  Eigen::MatrixXd Gk = B * R.ldlt().solve(B.transpose());
  Eigen::MatrixXd Hk = 0.5 * (Q + Q.transpose());
  Eigen::MatrixXd last_finite = Hk;
  int iters = 0;
  bool doubled = false;
  for (; iters < std::min(max_iter, 200); ++iters) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> W(I + Gk * Hk);
    const Eigen::MatrixXd WinvA = W.solve(Ak);
    const Eigen::MatrixXd Anext = Ak * WinvA;
    Eigen::MatrixXd Gnext = Gk + Ak * W.solve(Gk) * Ak.transpose();
    Eigen::MatrixXd Hnext = Hk + Ak.transpose() * Hk * WinvA;
    Gnext = 0.5 * (Gnext + Gnext.transpose());
    Hnext = 0.5 * (Hnext + Hnext.transpose());
    if (!Hnext.allFinite() || !Gnext.allFinite() || !Anext.allFinite()) break;
    const double change = (Hnext - Hk).norm();
    Ak = Anext;
    Gk = Gnext;
    Hk = Hnext;
    last_finite = Hk;
    if (change <= 1e-14 * (1.0 + Hk.norm())) {
      doubled = true;
      ++iters;
      break;
    }
  }

  Eigen::MatrixXd P = doubled ? Hk : 0.5 * (Q + Q.transpose());
  if (!doubled) iters = 0;
  // Fixed-point refinement (or the whole solve if doubling broke down).
  for (; iters < max_iter; ++iters) {
    if (dare_residual(A, B, Q, R, P) <= tolerance(P)) break;
    Eigen::MatrixXd next = riccati_map(A, B, Q, R, P);
    if (!next.allFinite() || next.norm() > 1e15) {
      DareResult res;
      res.P = last_finite;
      res.iterations = iters;
      res.residual = std::numeric_limits<double>::infinity();
      return res;
    }
    P = std::move(next);
    last_finite = P;
  }
  return finish(std::move(P), iters);
}

/// Stabilizing solution, or nullopt ("no stabilizing solution").
inline std::optional<Eigen::MatrixXd> dare_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                 const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                                 int max_iter = 10000) {
  auto res = dare_iterate(A, B, Q, R, max_iter);
  if (!res.converged || !res.stabilizing) return std::nullopt;
  return std::move(res.P);
}

}  // namespace statseek::agents
