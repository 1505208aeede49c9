#pragma once

// Convex quadratic programs over a polytope:
//
//   minimize  1/2 x'(H + ridge I)x + g'x   subject to   x in Omega.
//
// Box-only problems with a positive definite Hessian go through a primal
// active-set method, general rows with a positive definite Hessian through a
// dual active-set method. Semidefinite Hessians (or a stalled active-set
// run) fall back to an OSQP-style ADMM whose iterates are periodically
// polished by solving the equality-constrained KKT system on the guessed
// active set.
//
// Multipliers follow the convention H x + g + C'y = 0 with C = [I; A]:
// y_j > 0 on an active upper bound, y_j < 0 on an active lower bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "statseek/errors.hpp"
#include "statseek/profiles.hpp"

namespace statseek {

struct QpOptions {
  double tol_kkt = kDefaultTolKkt;
  double tol_feas = kDefaultTolFeas;
  int max_iter = 50000;
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  double kkt_residual = 0.0;
  int iterations = 0;
};

namespace detail {

/// Stacked row bounds l <= C x <= u for C = [I; A].
struct RowBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

inline RowBounds row_bounds(const Polytope& omega) {
  const int n = omega.dim();
  const int m = omega.inequalities();
  RowBounds rb{Eigen::VectorXd(n + m), Eigen::VectorXd(n + m)};
  rb.lo.head(n) = omega.lower();
  rb.hi.head(n) = omega.upper();
  rb.lo.tail(m).setConstant(-kInf);
  rb.hi.tail(m) = omega.b();
  return rb;
}

inline Eigen::VectorXd apply_rows(const Polytope& omega, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(omega.dim() + omega.inequalities());
  out.head(omega.dim()) = x;
  out.tail(omega.inequalities()) = omega.A() * x;
  return out;
}

inline Eigen::VectorXd apply_rows_transposed(const Polytope& omega, const Eigen::VectorXd& y) {
  const int n = omega.dim();
  return y.head(n) + omega.A().transpose() * y.tail(omega.inequalities());
}

}  // namespace detail

/// Infinity-norm KKT residual of (x, y): the largest of primal violation,
/// Lagrangian gradient, and complementarity/sign mismatch.
inline double kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Polytope& omega,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const auto rb = detail::row_bounds(omega);
  const Eigen::VectorXd cx = detail::apply_rows(omega, x);
  double r = omega.violation(x);
  r = std::max(r, (H * x + g + detail::apply_rows_transposed(omega, y)).lpNorm<Eigen::Infinity>());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (y[j] > 0) {
      r = std::max(r, std::isfinite(rb.hi[j]) ? std::min(y[j], std::abs(rb.hi[j] - cx[j])) : y[j]);
    } else if (y[j] < 0) {
      r = std::max(r, std::isfinite(rb.lo[j]) ? std::min(-y[j], std::abs(cx[j] - rb.lo[j])) : -y[j]);
    }
  }
  return r;
}

namespace detail {

enum class BoundState { kFree, kLower, kUpper };

/// Primal active-set method for box constraints. Returns false if a reduced
/// Hessian is not positive definite, in which case the caller falls back to
/// ADMM.
inline bool box_active_set(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Polytope& omega,
                           const QpOptions& opts, QpSolution& out) {
  const int n = omega.dim();
  const auto& lo = omega.lower();
  const auto& hi = omega.upper();

  Eigen::LLT<Eigen::MatrixXd> full(H);
  if (full.info() != Eigen::Success) return false;
  Eigen::VectorXd x = omega.clip(full.solve(-g));

  std::vector<BoundState> state(n, BoundState::kFree);
  for (int j = 0; j < n; ++j) {
    if (x[j] <= lo[j]) state[j] = BoundState::kLower;
    else if (x[j] >= hi[j]) state[j] = BoundState::kUpper;
  }

  const double mult_tol = 1e-13 * (1.0 + g.lpNorm<Eigen::Infinity>() +
                                   H.lpNorm<Eigen::Infinity>() * x.lpNorm<Eigen::Infinity>());
  const int max_it = 20 * n + 100;
  std::vector<int> free_idx;
  free_idx.reserve(n);
  for (int it = 0; it < max_it; ++it) {
    out.iterations = it + 1;
    free_idx.clear();
    for (int j = 0; j < n; ++j) if (state[j] == BoundState::kFree) free_idx.push_back(j);
    const int nf = static_cast<int>(free_idx.size());

    if (nf > 0) {
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        const int ja = free_idx[a];
        double acc = g[ja];
        for (int k = 0; k < n; ++k) {
          if (state[k] != BoundState::kFree) acc += H(ja, k) * x[k];
        }
        rhs[a] = -acc;
        for (int b = 0; b < nf; ++b) Hff(a, b) = H(ja, free_idx[b]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(Hff);
      if (llt.info() != Eigen::Success) return false;
      const Eigen::VectorXd target = llt.solve(rhs);

      double step = 1.0;
      int blocking = -1;
      BoundState blocking_state = BoundState::kFree;
      for (int a = 0; a < nf; ++a) {
        const int j = free_idx[a];
        const double p = target[a] - x[j];
        if (target[a] < lo[j] && p < 0) {
          const double t = (lo[j] - x[j]) / p;
          if (t < step) { step = t; blocking = j; blocking_state = BoundState::kLower; }
        } else if (target[a] > hi[j] && p > 0) {
          const double t = (hi[j] - x[j]) / p;
          if (t < step) { step = t; blocking = j; blocking_state = BoundState::kUpper; }
        }
      }
      step = std::max(step, 0.0);
      for (int a = 0; a < nf; ++a) {
        const int j = free_idx[a];
        x[j] = std::clamp(x[j] + step * (target[a] - x[j]), lo[j], hi[j]);
      }
      if (blocking >= 0) {
        state[blocking] = blocking_state;
        x[blocking] = blocking_state == BoundState::kLower ? lo[blocking] : hi[blocking];
        continue;
      }
    }

    // Full step taken: check the bound multipliers.
    const Eigen::VectorXd grad = H * x + g;
    int release = -1;
    double worst = -mult_tol;
    for (int j = 0; j < n; ++j) {
      if (lo[j] == hi[j]) continue;
      double lambda = 0.0;
      if (state[j] == BoundState::kLower) lambda = grad[j];
      else if (state[j] == BoundState::kUpper) lambda = -grad[j];
      else continue;
      if (lambda < worst) { worst = lambda; release = j; }
    }
    if (release < 0) {
      out.x = x;
      out.multipliers = Eigen::VectorXd::Zero(n);
      out.multipliers.head(n) = -grad;
      out.kkt_residual = kkt_residual(H, g, omega, x, out.multipliers);
      return true;
    }
    state[release] = BoundState::kFree;
  }
  (void)opts;
  throw MaxIterationsError("max iterations in box active-set QP", x);
}

/// Solve the equality-constrained problem on the active set guessed from an
/// ADMM iterate. Returns false if the guess does not give a valid KKT point.
inline bool polish(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Polytope& omega,
                   const RowBounds& rb, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                   const QpOptions& opts, QpSolution& out) {
  const int n = omega.dim();
  const int rows = static_cast<int>(z.size());
  std::vector<int> active;
  std::vector<double> target;
  for (int j = 0; j < rows; ++j) {
    if (std::isfinite(rb.lo[j]) && z[j] - rb.lo[j] < -y[j]) {
      active.push_back(j);
      target.push_back(rb.lo[j]);
    } else if (std::isfinite(rb.hi[j]) && rb.hi[j] - z[j] < y[j]) {
      active.push_back(j);
      target.push_back(rb.hi[j]);
    }
  }
  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  Eigen::VectorXd rhs(n + na);
  kkt.topLeftCorner(n, n) = H;
  rhs.head(n) = -g;
  for (int a = 0; a < na; ++a) {
    const int j = active[a];
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    if (j < n) row[j] = 1.0;
    else row = omega.A().row(j - n);
    kkt.block(n + a, 0, 1, n) = row;
    kkt.block(0, n + a, n, 1) = row.transpose();
    rhs[n + a] = target[a];
  }
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  if (!sol.allFinite()) return false;
  Eigen::VectorXd yy = Eigen::VectorXd::Zero(rows);
  for (int a = 0; a < na; ++a) yy[active[a]] = sol[n + a];
  const Eigen::VectorXd xx = sol.head(n);
  const double r = kkt_residual(H, g, omega, xx, yy);
  if (r > opts.tol_kkt || omega.violation(xx) > opts.tol_feas) return false;
  out.x = xx;
  out.multipliers = yy;
  out.kkt_residual = r;
  return true;
}

/// Dual active-set method (Goldfarb and Idnani) for a positive definite H
/// and general rows. Starts from the unconstrained minimizer and adds the
/// most violated constraint each round, dropping ones whose multiplier would
/// turn negative. Linearly dependent active rows (a vertex where more rows
/// meet than there are coordinates) are never added, which is where ADMM
/// polishing struggles. The factorization is rebuilt after every change of
/// the active set; n is small here. Returns false on a stall.
inline bool dual_active_set(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Polytope& omega,
                            const QpOptions& opts, QpSolution& out) {
  const int n = omega.dim();
  const auto rb = row_bounds(omega);
  const int rows = static_cast<int>(rb.lo.size());

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd J0 = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));

  // constraint k is sign_k * c_j' x >= sign_k * bound (== for equalities)
  struct Con {
    int row;
    double sign;
    double bound;
    bool eq;
  };
  std::vector<Con> cons;
  for (int j = 0; j < rows; ++j) {
    if (rb.lo[j] == rb.hi[j]) {
      cons.push_back({j, 1.0, rb.lo[j], true});
      continue;
    }
    if (std::isfinite(rb.lo[j])) cons.push_back({j, 1.0, rb.lo[j], false});
    if (std::isfinite(rb.hi[j])) cons.push_back({j, -1.0, -rb.hi[j], false});
  }
  auto normal = [&](const Con& c) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    if (c.row < n) a[c.row] = c.sign;
    else a = c.sign * omega.A().row(c.row - n).transpose();
    return a;
  };

  Eigen::VectorXd x = llt.solve(-g);
  std::vector<int> active;
  std::vector<double> u;
  Eigen::MatrixXd J = J0;
  Eigen::MatrixXd R(0, 0);
  auto refactor = [&] {
    const int q = static_cast<int>(active.size());
    if (q == 0) {
      J = J0;
      R.resize(0, 0);
      return;
    }
    Eigen::MatrixXd N(n, q);
    for (int k = 0; k < q; ++k) N.col(k) = normal(cons[active[k]]);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(L.triangularView<Eigen::Lower>().solve(N));
    J = J0 * Eigen::MatrixXd(qr.householderQ());
    R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  };
  auto drop = [&](int k) {
    active.erase(active.begin() + k);
    u.erase(u.begin() + k);
    refactor();
  };

  const double scale = 1.0 + g.lpNorm<Eigen::Infinity>();
  const int max_it = 10 * (static_cast<int>(cons.size()) + n) + 100;
  for (int it = 0; it < max_it; ++it) {
    out.iterations = it + 1;
    int p = -1;
    double worst = 0.0, sp = 0.0;
    for (int k = 0; k < static_cast<int>(cons.size()); ++k) {
      if (std::find(active.begin(), active.end(), k) != active.end()) continue;
      const Eigen::VectorXd a = normal(cons[k]);
      const double s = a.dot(x) - cons[k].bound;
      const double viol = cons[k].eq ? std::abs(s) : -s;
      const double tol = 1e-12 * (1.0 + std::abs(cons[k].bound) + a.cwiseAbs().dot(x.cwiseAbs()));
      if (viol > tol && viol > worst) {
        worst = viol;
        p = k;
        sp = s;
      }
    }
    if (p < 0) {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
      for (std::size_t k = 0; k < active.size(); ++k) y[cons[active[k]].row] -= cons[active[k]].sign * u[k];
      out.x = x;
      out.multipliers = y;
      out.kkt_residual = kkt_residual(H, g, omega, x, y);
      return out.kkt_residual <= std::max(opts.tol_kkt, 1e-10 * scale);
    }
    if (cons[p].eq && sp > 0) {
      cons[p].sign = -1.0;
      cons[p].bound = -cons[p].bound;
    }
    const Eigen::VectorXd np = normal(cons[p]);
    double up = 0.0;

    bool added = false;
    for (int inner = 0; inner < max_it && !added; ++inner) {
      const int q = static_cast<int>(active.size());
      const Eigen::VectorXd d = J.transpose() * np;
      const Eigen::VectorXd z = J.rightCols(n - q) * d.tail(n - q);
      const Eigen::VectorXd r = q ? Eigen::VectorXd(R.triangularView<Eigen::Upper>().solve(d.head(q)))
                                  : Eigen::VectorXd(0);
      double t1 = kInf;
      int l = -1;
      for (int k = 0; k < q; ++k) {
        if (cons[active[k]].eq || r[k] <= 0) continue;
        if (u[k] / r[k] < t1) {
          t1 = u[k] / r[k];
          l = k;
        }
      }
      const double zn = z.dot(np);
      const double t2 = z.norm() > 1e-12 * np.norm() && zn > 0 ? -(np.dot(x) - cons[p].bound) / zn : kInf;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) throw InfeasibleError("infeasible: empty feasible set");
      if (std::isfinite(t2)) x += t * z;
      for (int k = 0; k < q; ++k) u[k] -= t * r[k];
      up += t;
      if (t2 <= t1) {
        active.push_back(p);
        u.push_back(up);
        refactor();
        added = true;
      } else {
        drop(l);
      }
    }
    if (!added) return false;
  }
  return false;
}

inline QpSolution admm(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Polytope& omega,
                       const QpOptions& opts) {
  const int n = omega.dim();
  const int m = omega.inequalities();
  const int rows = n + m;
  const auto rb = row_bounds(omega);

  Eigen::MatrixXd C(rows, n);
  C.topRows(n).setIdentity();
  C.bottomRows(m) = omega.A();

  constexpr double sigma = 1e-6;
  constexpr double relax = 1.6;
  double rho = 0.1;
  auto rho_vec = [&](double r) {
    Eigen::VectorXd v(rows);
    for (int j = 0; j < rows; ++j) v[j] = rb.lo[j] == rb.hi[j] ? 1e3 * r : r;
    return v;
  };
  Eigen::VectorXd rho_v = rho_vec(rho);
  auto factor = [&] {
    Eigen::MatrixXd K = H + sigma * Eigen::MatrixXd::Identity(n, n) +
                        C.transpose() * rho_v.asDiagonal() * C;
    return Eigen::LDLT<Eigen::MatrixXd>(K);
  };
  auto ldlt = factor();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = (C * x).cwiseMax(rb.lo).cwiseMin(rb.hi);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);

  const double scale = 1.0 + g.lpNorm<Eigen::Infinity>();
  QpSolution out;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::VectorXd rhs = sigma * x - g + C.transpose() * (rho_v.cwiseProduct(z) - y);
    const Eigen::VectorXd xt = ldlt.solve(rhs);
    const Eigen::VectorXd zt = C * xt;
    const Eigen::VectorXd x_new = relax * xt + (1.0 - relax) * x;
    const Eigen::VectorXd z_hat = relax * zt + (1.0 - relax) * z;
    const Eigen::VectorXd z_new = (z_hat + y.cwiseQuotient(rho_v)).cwiseMax(rb.lo).cwiseMin(rb.hi);
    const Eigen::VectorXd y_new = y + rho_v.cwiseProduct(z_hat - z_new);
    if (!x_new.allFinite() || !y_new.allFinite()) {
      throw NumericalError("numerical breakdown in ADMM QP");
    }

    // Primal infeasibility certificate.
    const Eigen::VectorXd dy = y_new - y;
    const double dy_norm = dy.lpNorm<Eigen::Infinity>();
    if (it > 50 && dy_norm > 1e-10) {
      double support = 0.0;
      bool certificate = (C.transpose() * dy).lpNorm<Eigen::Infinity>() <= 1e-7 * dy_norm;
      for (int j = 0; j < rows && certificate; ++j) {
        if (dy[j] > 1e-9 * dy_norm) {
          if (!std::isfinite(rb.hi[j])) certificate = false;
          else support += rb.hi[j] * dy[j];
        } else if (dy[j] < -1e-9 * dy_norm) {
          if (!std::isfinite(rb.lo[j])) certificate = false;
          else support += rb.lo[j] * dy[j];
        }
      }
      if (certificate && support < -1e-7 * dy_norm) {
        throw InfeasibleError("infeasible: empty feasible set");
      }
    }

    x = x_new;
    z = z_new;
    y = y_new;
    out.iterations = it;

    if (it % 10 == 0) {
      const double r_prim = (C * x - z).lpNorm<Eigen::Infinity>();
      const double r_dual = (H * x + g + C.transpose() * y).lpNorm<Eigen::Infinity>();
      if (r_prim <= 1e-4 * scale && r_dual <= 1e-4 * scale && polish(H, g, omega, rb, z, y, opts, out)) {
        out.iterations = it;
        return out;
      }
      if (it % 50 == 0) {
        const double prim_scale = std::max({(C * x).lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>(), 1e-12});
        const double dual_scale = std::max({(H * x).lpNorm<Eigen::Infinity>(),
                                            (C.transpose() * y).lpNorm<Eigen::Infinity>(),
                                            g.lpNorm<Eigen::Infinity>(), 1e-12});
        const double ratio = std::sqrt((r_prim / prim_scale) / std::max(r_dual / dual_scale, 1e-30));
        if (ratio > 5.0 || ratio < 0.2) {
          rho = std::clamp(rho * ratio, 1e-6, 1e6);
          rho_v = rho_vec(rho);
          ldlt = factor();
        }
      }
    }
  }
  Eigen::VectorXd best = omega.clip(x);
  throw MaxIterationsError("max iterations in ADMM QP", best);
}

}  // namespace detail

/// Minimize 1/2 x'(H + ridge I)x + g'x over omega. Deterministic for fixed
/// inputs. Throws InfeasibleError on an empty polytope and MaxIterationsError
/// (with the best iterate attached) if the iteration budget runs out.
inline QpSolution qp_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Polytope& omega,
                           double ridge = 0.0, const QpOptions& opts = {}) {
  const int n = omega.dim();
  detail::require_dims(H.rows() == n && H.cols() == n, "QP Hessian");
  detail::require_dims(g.size() == n, "QP linear term");
  if (ridge < 0) throw Error("qp_solve: negative ridge");
  if (!H.allFinite() || !g.allFinite()) throw NumericalError("numerical breakdown: non-finite QP data");

  Eigen::MatrixXd Hr = 0.5 * (H + H.transpose());
  Hr.diagonal().array() += ridge;

  QpSolution out;
  if (omega.is_box() && detail::box_active_set(Hr, g, omega, opts, out)) return out;
  if (detail::dual_active_set(Hr, g, omega, opts, out)) return out;
  return detail::admm(Hr, g, omega, opts);
}

}  // namespace statseek
