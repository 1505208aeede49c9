#pragma once

// N-player Nash game with costs
//   J_i = a_i x_i - x_i (60 N - 1'x),   a_i = N (1 + (i - 1)/2),
// over the box [7, 100]^N. Each J_i is strictly convex in x_i, so the best
// response is the clipped root of  a_i - 60N + sum_{j != i} x_j + 2 x_i = 0.

#include <algorithm>
#include <memory>

#include <Eigen/Dense>

#include "statseek/agents/oracle.hpp"

namespace statseek::agents {

inline constexpr double kQuadraticLower = 7.0;
inline constexpr double kQuadraticUpper = 100.0;

/// a_i for zero-based agent index i.
inline double quadratic_game_weight(int players, int i) { return players * (1.0 + i / 2.0); }

inline double quadratic_game_cost(int players, int i, const Eigen::VectorXd& x) {
  return quadratic_game_weight(players, i) * x[i] - x[i] * (60.0 * players - x.sum());
}

inline double quadratic_game_react(int players, int i, const Eigen::VectorXd& x_minus_i) {
  detail::require_dims(x_minus_i.size() == players - 1, "quadratic game opponents");
  if (i < 0 || i >= players) throw DimensionError("quadratic game agent index");
  const double unclipped = (60.0 * players - quadratic_game_weight(players, i) - x_minus_i.sum()) / 2.0;
  return std::clamp(unclipped, kQuadraticLower, kQuadraticUpper);
}

class QuadraticGameAgent final : public AgentOracle {
 public:
  QuadraticGameAgent(int players, int index) : players_(players), index_(index) {}
  int output_dim() const override { return 1; }
  int input_dim() const override { return players_ - 1; }
  Reaction react(const Eigen::VectorXd& x_minus_i) const override {
    return {Eigen::VectorXd::Constant(1, quadratic_game_react(players_, index_, x_minus_i)), false};
  }

 private:
  int players_;
  int index_;
};

inline Game quadratic_game(int players = 10) {
  if (players < 2) throw DimensionError("quadratic game needs at least two players");
  Game g;
  g.name = "quadratic10";
  g.partition = Partition::scalar(players);
  g.omega = Polytope::box(players, kQuadraticLower, kQuadraticUpper);
  for (int i = 0; i < players; ++i) g.agents.push_back(std::make_shared<QuadraticGameAgent>(players, i));
  g.range_lower = g.omega.lower();
  g.range_upper = g.omega.upper();
  // F_i(x) = a_i - 60N + 1'x + x_i; its Jacobian I + 11' has norm N + 1.
  g.pseudo_gradient = PseudoGradient{
      [players](const Eigen::VectorXd& x) {
        Eigen::VectorXd F(players);
        const double total = x.sum();
        for (int i = 0; i < players; ++i) F[i] = quadratic_game_weight(players, i) - 60.0 * players + total + x[i];
        return F;
      },
      static_cast<double>(players + 1)};
  return g;
}

}  // namespace statseek::agents
