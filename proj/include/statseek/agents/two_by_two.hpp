#pragma once

// Two-player scalar games on [0, 1]^2.
//
// no_equilibrium: J_1 = -x_1^2 + 2 x_1 x_2,  J_2 = x_2 - 2 x_1 x_2. J_1 is
// concave in x_1 and J_2 linear in x_2, so both best responses sit at a
// vertex and jointly cycle; the game has no Nash equilibrium. Ties at 1/2
// resolve to the smaller action.
//
// infinite_equilibria: a coupled-constraint GNEP whose quadratic cost data
// comes from the caller (see configs/infinite_eq.json); its stationary set
// is {(a, 1 - a) : a in [1/2, 1]}.

#include <memory>

#include <Eigen/Dense>

#include "statseek/agents/oracle.hpp"
#include "statseek/agents/qp_gnep.hpp"

namespace statseek::agents {

enum class TwoByTwoKind { kInfiniteEquilibria, kNoEquilibrium };

inline double no_equilibrium_cost(int i, double x1, double x2) {
  return i == 0 ? -x1 * x1 + 2.0 * x1 * x2 : x2 - 2.0 * x1 * x2;
}

inline double no_equilibrium_react(int i, double other) {
  if (i == 0) return -1.0 + 2.0 * other < 0.0 ? 1.0 : 0.0;
  return 1.0 - 2.0 * other < 0.0 ? 1.0 : 0.0;
}

class NoEquilibriumAgent final : public AgentOracle {
 public:
  explicit NoEquilibriumAgent(int index) : index_(index) {}
  int output_dim() const override { return 1; }
  int input_dim() const override { return 1; }
  Reaction react(const Eigen::VectorXd& x_minus_i) const override {
    detail::require_dims(x_minus_i.size() == 1, "two-player opponent");
    return {Eigen::VectorXd::Constant(1, no_equilibrium_react(index_, x_minus_i[0])), false};
  }

 private:
  int index_;
};

inline Game no_equilibrium_game() {
  Game g;
  g.name = "no_eq";
  g.partition = Partition::scalar(2);
  g.omega = Polytope::box(2, 0.0, 1.0);
  g.agents = {std::make_shared<NoEquilibriumAgent>(0), std::make_shared<NoEquilibriumAgent>(1)};
  g.range_lower = g.omega.lower();
  g.range_upper = g.omega.upper();
  return g;
}

/// The infinite-equilibria game from transcribed cost data. Checks the
/// 2-player scalar structure; the stationary set is validated by tests.
inline Game infinite_equilibria_game(QpGnep data) {
  if (data.partition.agents() != 2 || data.partition.total() != 2) {
    throw DimensionError("infinite_eq game needs two scalar players");
  }
  return qp_gnep_game(std::move(data), "infinite_eq");
}

/// Single dispatch point for the two 2x2 games.
inline double two_by_two_react(TwoByTwoKind kind, const QpGnep* infinite_eq_data, int i, double other) {
  if (kind == TwoByTwoKind::kNoEquilibrium) return no_equilibrium_react(i, other);
  if (infinite_eq_data == nullptr) throw Error("infinite_eq game requires transcribed cost data");
  return qp_gnep_react(*infinite_eq_data, i, Eigen::VectorXd::Constant(1, other)).action[0];
}

}  // namespace statseek::agents
