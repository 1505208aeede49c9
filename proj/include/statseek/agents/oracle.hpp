#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "statseek/errors.hpp"
#include "statseek/profiles.hpp"

namespace statseek {

/// An agent's answer to a query. `distress` marks reactions that could not
/// honor the oracle's contract exactly (empty local interval, no stabilizing
/// Riccati solution) and were replaced by a feasible fallback.
struct Reaction {
  Eigen::VectorXd action;
  bool distress = false;
};

/// Private action-reaction mapping f_i : x_{-i} -> x_i. Implementations are
/// deterministic and stateless, so concurrent calls are safe.
class AgentOracle {
 public:
  virtual ~AgentOracle() = default;
  virtual int output_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual Reaction react(const Eigen::VectorXd& x_minus_i) const = 0;
};

using OraclePtr = std::shared_ptr<const AgentOracle>;

/// Oracle backed by a callable; handy for tests and small hand-made games.
class FunctionOracle final : public AgentOracle {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  FunctionOracle(int outputs, int inputs, Fn fn) : outputs_(outputs), inputs_(inputs), fn_(std::move(fn)) {}

  int output_dim() const override { return outputs_; }
  int input_dim() const override { return inputs_; }
  Reaction react(const Eigen::VectorXd& x_minus_i) const override {
    detail::require_dims(x_minus_i.size() == inputs_, "oracle input");
    return {fn_(x_minus_i), false};
  }

 private:
  int outputs_;
  int inputs_;
  Fn fn_;
};

/// Stacked pseudo-gradient (grad_{x_i} J_i)_i of a game with differentiable
/// costs, used by the verification oracles.
struct PseudoGradient {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::optional<double> lipschitz;
};

/// Everything the engine needs to run against a population of agents.
struct Game {
  std::string name;
  Partition partition;
  Polytope omega;
  std::vector<OraclePtr> agents;
  /// Range estimate m^- <= x <= m^+ for the passive random draws.
  Eigen::VectorXd range_lower;
  Eigen::VectorXd range_upper;
  /// Replaces the uniform draw during the passive phase when set.
  std::function<Eigen::VectorXd(std::mt19937_64&)> init_sampler;
  std::optional<PseudoGradient> pseudo_gradient;

  void validate() const {
    detail::require_dims(static_cast<int>(agents.size()) == partition.agents(), "agents vs partition");
    detail::require_dims(omega.dim() == partition.total(), "polytope vs partition");
    detail::require_dims(range_lower.size() == partition.total() && range_upper.size() == partition.total(),
                         "range estimate");
    for (int i = 0; i < partition.agents(); ++i) {
      detail::require_dims(agents[i]->output_dim() == partition.size(i), "oracle output dim");
      detail::require_dims(agents[i]->input_dim() == partition.complement_size(i), "oracle input dim");
    }
    if ((range_lower.array() > range_upper.array()).any()) throw Error("range estimate: lower > upper");
    if (!range_lower.allFinite() || !range_upper.allFinite()) throw Error("range estimate must be finite");
  }
};

}  // namespace statseek
