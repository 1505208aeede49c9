#pragma once

// Generic GNEP with quadratic costs and a shared polytope:
//   J_i(x_i, x_{-i}) = 1/2 x_i'Q_i x_i + x_i'(q_i + R_i x_{-i}),
//   (x_i, x_{-i}) in Omega.
// The best response restricts Omega to agent i's variables and solves a
// strictly convex QP.

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "statseek/agents/oracle.hpp"
#include "statseek/qp.hpp"

namespace statseek::agents {

struct QpAgentCost {
  Eigen::MatrixXd Q;  // n_i x n_i, positive definite
  Eigen::VectorXd q;  // n_i
  Eigen::MatrixXd R;  // n_i x n_{-i}
};

struct QpGnep {
  Partition partition;
  Polytope omega;
  std::vector<QpAgentCost> costs;

  void validate() const {
    detail::require_dims(static_cast<int>(costs.size()) == partition.agents(), "costs vs agents");
    detail::require_dims(omega.dim() == partition.total(), "polytope vs partition");
    for (int i = 0; i < partition.agents(); ++i) {
      const auto& c = costs[i];
      const int ni = partition.size(i);
      detail::require_dims(c.Q.rows() == ni && c.Q.cols() == ni, "Q_i");
      detail::require_dims(c.q.size() == ni, "q_i");
      detail::require_dims(c.R.rows() == ni && c.R.cols() == partition.complement_size(i), "R_i");
      Eigen::MatrixXd sym = 0.5 * (c.Q + c.Q.transpose());
      if (Eigen::LLT<Eigen::MatrixXd>(sym).info() != Eigen::Success) {
        throw Error("qp_gnep: Q_" + std::to_string(i + 1) + " is not positive definite");
      }
    }
  }

  double cost(int i, const Eigen::VectorXd& x) const {
    const Eigen::VectorXd xi = partition.block(x, i);
    const Eigen::VectorXd xo = partition.complement(x, i);
    const auto& c = costs[i];
    return 0.5 * xi.dot(c.Q * xi) + xi.dot(c.q + c.R * xo);
  }

  /// Stacked grad_{x_i} J_i.
  Eigen::VectorXd pseudo_gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd F(partition.total());
    for (int i = 0; i < partition.agents(); ++i) {
      const auto& c = costs[i];
      F.segment(partition.offset(i), partition.size(i)) =
          c.Q * partition.block(x, i) + c.q + c.R * partition.complement(x, i);
    }
    return F;
  }
};

/// Agent i's slice of Omega once x_{-i} is fixed. Throws
/// InfeasibleError("empty reaction set") when a row without x_i terms is
/// already violated.
inline Polytope reaction_set(const QpGnep& game, int i, const Eigen::VectorXd& x_minus_i, double tol = kDefaultTolFeas) {
  const auto& P = game.partition;
  const int off = P.offset(i);
  const int ni = P.size(i);
  const auto others = P.complement_indices(i);
  const auto& A = game.omega.A();
  std::vector<int> keep;
  Eigen::VectorXd rhs(A.rows());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    double shift = 0.0;
    for (std::size_t k = 0; k < others.size(); ++k) shift += A(r, others[k]) * x_minus_i[k];
    rhs[r] = game.omega.b()[r] - shift;
    if (A.row(r).segment(off, ni).lpNorm<Eigen::Infinity>() == 0.0) {
      if (rhs[r] < -tol) throw InfeasibleError("empty reaction set");
      continue;
    }
    keep.push_back(static_cast<int>(r));
  }
  // rows touching a single coordinate of x_i are just bounds
  Eigen::VectorXd lo = game.omega.lower().segment(off, ni);
  Eigen::VectorXd hi = game.omega.upper().segment(off, ni);
  std::vector<int> general;
  for (int r : keep) {
    const Eigen::VectorXd a = A.row(r).segment(off, ni).transpose();
    int nonzero = 0, t = 0;
    for (int k = 0; k < ni; ++k)
      if (a[k] != 0.0) ++nonzero, t = k;
    if (nonzero != 1) {
      general.push_back(r);
    } else if (a[t] > 0) {
      hi[t] = std::min(hi[t], rhs[r] / a[t]);
    } else {
      lo[t] = std::max(lo[t], rhs[r] / a[t]);
    }
  }
  for (int k = 0; k < ni; ++k) {
    if (lo[k] > hi[k] + tol) throw InfeasibleError("empty reaction set");
    if (lo[k] > hi[k]) lo[k] = hi[k];
  }
  Eigen::MatrixXd Ai(general.size(), ni);
  Eigen::VectorXd bi(general.size());
  for (std::size_t r = 0; r < general.size(); ++r) {
    Ai.row(r) = A.row(general[r]).segment(off, ni);
    bi[r] = rhs[general[r]];
  }
  return Polytope(lo, hi, Ai, bi);
}

inline Reaction qp_gnep_react(const QpGnep& game, int i, const Eigen::VectorXd& x_minus_i, const QpOptions& opts = {}) {
  detail::require_dims(x_minus_i.size() == game.partition.complement_size(i), "qp_gnep opponents");
  if (!x_minus_i.allFinite()) throw NumericalError("numerical breakdown: non-finite opponents profile");
  const auto& c = game.costs.at(i);
  const Polytope local = reaction_set(game, i, x_minus_i, opts.tol_feas);
  try {
    return {qp_solve(c.Q, c.q + c.R * x_minus_i, local, 0.0, opts).x, false};
  } catch (const InfeasibleError&) {
    throw InfeasibleError("empty reaction set");
  }
}

class QpGnepAgent final : public AgentOracle {
 public:
  QpGnepAgent(std::shared_ptr<const QpGnep> game, int index) : game_(std::move(game)), index_(index) {}
  int output_dim() const override { return game_->partition.size(index_); }
  int input_dim() const override { return game_->partition.complement_size(index_); }
  Reaction react(const Eigen::VectorXd& x_minus_i) const override { return qp_gnep_react(*game_, index_, x_minus_i); }

 private:
  std::shared_ptr<const QpGnep> game_;
  int index_;
};

/// Requires a bounded box for the random draws unless a range is supplied.
inline Game qp_gnep_game(QpGnep data, std::string name = "qp_gnep") {
  data.validate();
  auto shared = std::make_shared<const QpGnep>(std::move(data));
  Game g;
  g.name = std::move(name);
  g.partition = shared->partition;
  g.omega = shared->omega;
  for (int i = 0; i < g.partition.agents(); ++i) g.agents.push_back(std::make_shared<QpGnepAgent>(shared, i));
  g.range_lower = g.omega.lower();
  g.range_upper = g.omega.upper();
  g.pseudo_gradient = PseudoGradient{[shared](const Eigen::VectorXd& x) { return shared->pseudo_gradient(x); },
                                     std::nullopt};
  return g;
}

}  // namespace statseek::agents
