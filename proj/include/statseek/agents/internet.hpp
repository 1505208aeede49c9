#pragma once

// Internet switching game: user i sends x_i and pays
//   J_i = -(x_i / 1'x) (1 - 1'x),
// with x_1 in [0.3, 0.5], x_j in [0.01, 100] otherwise, and the shared
// constraint 1'x <= 1. Given the opponents' total s, agent i minimizes
//   phi(x) = -x (1 - x - s) / (x + s)
// over [l_i, min(u_i, 1 - s)].

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "statseek/agents/oracle.hpp"

namespace statseek::agents {

inline double internet_cost(double x, double others) { return -x * (1.0 - x - others) / (x + others); }

// phi'(x) = 1 - s / (x + s)^2,  phi''(x) = 2 s / (x + s)^3.
inline double internet_slope(double x, double s) { return 1.0 - s / ((x + s) * (x + s)); }
inline double internet_curvature(double x, double s) { return 2.0 * s / ((x + s) * (x + s) * (x + s)); }

/// Minimizer of phi over [lo, hi]: golden-section bracketing, then a
/// Newton polish on phi' kept inside the interval.
inline double internet_best_response(double others, double lo, double hi) {
  if (!std::isfinite(others) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw NumericalError("numerical breakdown: non-finite input to internet best response");
  }
  if (hi <= lo) return lo;
  if (others <= 0.0) return lo;  // phi' >= 1 > 0 everywhere on x > 0

  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = internet_cost(c, others);
  double fd = internet_cost(d, others);
  while (b - a > 1e-6 * (1.0 + std::abs(a))) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - kInvPhi * (b - a);
      fc = internet_cost(c, others);
    } else {
      a = c; c = d; fc = fd;
      d = a + kInvPhi * (b - a);
      fd = internet_cost(d, others);
    }
  }

  double x = 0.5 * (a + b);
  for (int it = 0; it < 50; ++it) {
    const double slope = internet_slope(x, others);
    if (std::abs(slope) <= 1e-10) break;
    const double next = std::clamp(x - slope / internet_curvature(x, others), lo, hi);
    if (next == x) break;  // pinned at a bound with the slope pointing outward
    x = next;
  }
  return x;
}

inline Reaction internet_gnep_react(int i, const Eigen::VectorXd& x_minus_i, double lower, double upper) {
  if (!x_minus_i.allFinite()) throw NumericalError("numerical breakdown: non-finite opponents profile");
  (void)i;
  const double others = x_minus_i.sum();
  const double hi = std::min(upper, 1.0 - others);
  if (hi < lower) return {Eigen::VectorXd::Constant(1, lower), true};
  return {Eigen::VectorXd::Constant(1, internet_best_response(others, lower, hi)), false};
}

class InternetAgent final : public AgentOracle {
 public:
  InternetAgent(int players, int index, double lower, double upper)
      : players_(players), index_(index), lower_(lower), upper_(upper) {}
  int output_dim() const override { return 1; }
  int input_dim() const override { return players_ - 1; }
  Reaction react(const Eigen::VectorXd& x_minus_i) const override {
    detail::require_dims(x_minus_i.size() == players_ - 1, "internet game opponents");
    return internet_gnep_react(index_, x_minus_i, lower_, upper_);
  }

 private:
  int players_;
  int index_;
  double lower_;
  double upper_;
};

/// `draw_upper` caps the random draws of users 2..N during the passive
/// phase; their nominal bound of 100 is far outside the coupling set.
inline Game internet_game(int players = 10, double draw_upper = 0.15) {
  if (players < 2) throw DimensionError("internet game needs at least two players");
  Game g;
  g.name = "internet";
  g.partition = Partition::scalar(players);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(players, 0.01);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(players, 100.0);
  lo[0] = 0.3;
  hi[0] = 0.5;
  g.omega = Polytope(lo, hi, Eigen::MatrixXd::Ones(1, players), Eigen::VectorXd::Ones(1));
  for (int i = 0; i < players; ++i) g.agents.push_back(std::make_shared<InternetAgent>(players, i, lo[i], hi[i]));
  g.range_lower = lo;
  g.range_upper = Eigen::VectorXd::Constant(players, draw_upper);
  g.range_upper[0] = hi[0];
  g.pseudo_gradient = PseudoGradient{
      [](const Eigen::VectorXd& x) {
        const double total = x.sum();
        Eigen::VectorXd F(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) F[i] = internet_slope(x[i], total - x[i]);
        return F;
      },
      std::nullopt};
  return g;
}

}  // namespace statseek::agents
