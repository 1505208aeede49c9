#pragma once

// Independent verification: extragradient for monotone games, the
// stationarity residual, and a grid scan for fixed points of tiny games.

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "statseek/agents/oracle.hpp"
#include "statseek/errors.hpp"
#include "statseek/profiles.hpp"
#include "statseek/projection.hpp"

namespace statseek {

struct PseudoGradientGame {
  Partition partition;
  Polytope omega;
  PseudoGradient gradient;
};

struct ExtragradientOptions {
  /// Fixed step; <= 0 selects 0.9 / L when L is known, else backtracking.
  double step = 0.0;
  double tol = 1e-10;
  int max_iter = 200000;
};

struct ExtragradientResult {
  Eigen::VectorXd x;
  double natural_residual = 0.0;
  int iterations = 0;
};

/// Extragradient for the variational inequality defined by the stacked
/// pseudo-gradient. Accepts x once ||x - P(x - step F(x))|| <= tol; nullopt
/// if that never happens within max_iter.
inline std::optional<ExtragradientResult> extragradient(const PseudoGradientGame& game, const Eigen::VectorXd& x0,
                                                        const ExtragradientOptions& opts = {}) {
  detail::require_dims(x0.size() == game.omega.dim(), "extragradient start");
  if (!contains(game.omega, x0)) throw Error("extragradient: starting point outside the feasible set");
  auto F = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd v = game.gradient.eval(x);
    if (!v.allFinite()) throw NumericalError("numerical breakdown: non-finite pseudo-gradient");
    return v;
  };

  const bool backtrack = opts.step <= 0.0 && !game.gradient.lipschitz;
  double step = opts.step > 0.0 ? opts.step : (game.gradient.lipschitz ? 0.9 / *game.gradient.lipschitz : 1.0);

  Eigen::VectorXd x = x0;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd Fx = F(x);
    Eigen::VectorXd y = project(game.omega, x - step * Fx);
    double residual = (x - y).norm();
    if (residual <= opts.tol) return ExtragradientResult{x, residual, it};
    Eigen::VectorXd Fy = F(y);
    if (backtrack) {
      while (step * (Fx - Fy).norm() > 0.9 * (x - y).norm() && step > 1e-12) {
        step *= 0.5;
        y = project(game.omega, x - step * Fx);
        residual = (x - y).norm();
        if (residual <= opts.tol) return ExtragradientResult{x, residual, it};
        Fy = F(y);
      }
    }
    x = project(game.omega, x - step * Fy);
  }
  return std::nullopt;
}

/// sum_i || x_i - f_i(x_{-i}) ||^2, zero exactly at stationary profiles.
inline double stationarity_residual(const CollectiveProfile& profile, const std::vector<OraclePtr>& agents) {
  const auto& P = profile.partition;
  detail::require_dims(static_cast<int>(agents.size()) == P.agents(), "oracles vs partition");
  double acc = 0.0;
  for (int i = 0; i < P.agents(); ++i) {
    const Reaction r = agents[i]->react(profile.complement(i));
    acc += (profile.block(i) - r.action).squaredNorm();
  }
  return acc;
}

/// Grid scan of a box with spacing about `resolution`. A grid point is kept
/// when its stationarity residual is below ((1 + L) h sqrt(d) / 2)^2, the
/// largest residual a grid neighbour of a true fixed point can have for
/// L-Lipschitz mappings. An empty result means no fixed point at this grid
/// resolution.
inline std::vector<Eigen::VectorXd> brute_force_fixed_points(const std::vector<OraclePtr>& agents,
                                                             const Partition& partition, const Polytope& omega,
                                                             double resolution, double lipschitz = 1.0) {
  const int d = partition.total();
  if (d > 3) throw Error("oracle scale exceeded: brute force needs total dimension <= 3");
  if (!omega.is_box() || !omega.lower().allFinite() || !omega.upper().allFinite()) {
    throw Error("brute force needs a bounded box");
  }
  if (!(resolution > 0)) throw Error("brute force resolution must be positive");

  std::vector<int> counts(d);
  std::vector<double> spacing(d);
  double h = 0.0;
  for (int k = 0; k < d; ++k) {
    const double width = omega.upper()[k] - omega.lower()[k];
    counts[k] = std::max(1, static_cast<int>(std::lround(width / resolution))) + 1;
    spacing[k] = width / (counts[k] - 1);
    h = std::max(h, spacing[k]);
  }
  const double bound = (1.0 + lipschitz) * h * std::sqrt(static_cast<double>(d)) / 2.0;
  const double threshold = bound * bound;

  std::vector<Eigen::VectorXd> found;
  std::vector<int> idx(d, 0);
  while (true) {
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = omega.lower()[k] + idx[k] * spacing[k];
    if (stationarity_residual(CollectiveProfile(x, partition), agents) <= threshold) found.push_back(x);
    int k = 0;
    while (k < d && ++idx[k] == counts[k]) idx[k++] = 0;
    if (k == d) break;
  }
  return found;
}

}  // namespace statseek
