#pragma once

// Competitive multi-agent LQR synthesis. Agent i owns a scalar input
// u_i = kappa_i z and, given the other agents' gains, designs an LQR for
//
//   z+ = (A + sum_{j != i} B_j kappa_j) z + B_i u_i,   y_i = C_i z,
//
// with cost sum_k y_i'Q_i y_i + r_i u_i^2.
//
// Sign convention: gains enter the dynamics as +B_i kappa_i, so the reaction
// is kappa_i = -(r_i + B_i'P_i B_i)^{-1} B_i'P_i A_i, the negated classical
// LQR gain.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "statseek/agents/dare.hpp"
#include "statseek/agents/oracle.hpp"

namespace statseek::agents {

inline constexpr double kLqrGainBound = 20.0;

struct LqrInstance {
  Eigen::MatrixXd A;
  std::vector<Eigen::VectorXd> B;  // B_i, n_z x 1
  Eigen::MatrixXd C;               // all n_y outputs
  std::vector<Eigen::MatrixXd> C_agent;
  std::vector<Eigen::MatrixXd> Q;
  std::vector<double> r;
  double gain_bound = kLqrGainBound;

  int agents() const { return static_cast<int>(B.size()); }
  int states() const { return static_cast<int>(A.rows()); }

  Eigen::MatrixXd B_all() const {
    Eigen::MatrixXd out(states(), agents());
    for (int i = 0; i < agents(); ++i) out.col(i) = B[i];
    return out;
  }

  Eigen::MatrixXd Q_bar(int i) const { return C_agent[i].transpose() * Q[i] * C_agent[i]; }

  /// A + sum_j B_j kappa_j over the given agents' gains (stacked profile).
  Eigen::MatrixXd closed_loop(const Eigen::VectorXd& gains) const {
    detail::require_dims(gains.size() == agents() * states(), "stacked gains");
    Eigen::MatrixXd M = A;
    for (int j = 0; j < agents(); ++j) M += B[j] * gains.segment(j * states(), states()).transpose();
    return M;
  }
};

inline int matrix_rank(const Eigen::MatrixXd& M) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

inline bool controllable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd ctrb(n, n * B.cols());
  Eigen::MatrixXd block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * B.cols(), B.cols()) = block / std::max(1.0, block.norm());
    block = A * block;
  }
  return matrix_rank(ctrb) == n;
}

inline bool observable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
  return controllable(A.transpose(), C.transpose());
}

/// kappa_i for a fixed closed-loop matrix A_i: solves the DARE and returns
/// the clipped gain. Distress is raised when no stabilizing solution exists,
/// in which case the gain of the last Riccati iterate is clipped instead.
inline Reaction lqr_react_for(const LqrInstance& inst, int i, const Eigen::MatrixXd& A_i) {
  const Eigen::MatrixXd Bi = inst.B[i];
  const Eigen::MatrixXd R = Eigen::MatrixXd::Constant(1, 1, inst.r[i]);
  const DareResult dare = dare_iterate(A_i, Bi, inst.Q_bar(i), R);
  Eigen::VectorXd gain = -lqr_gain(A_i, Bi, R, dare.P).transpose();
  const bool ok = dare.converged && dare.stabilizing && gain.allFinite();
  if (!gain.allFinite()) gain.setZero();
  gain = gain.cwiseMax(-inst.gain_bound).cwiseMin(inst.gain_bound);
  return {gain, !ok};
}

inline Reaction lqr_react(const LqrInstance& inst, int i, const Eigen::VectorXd& kappa_minus_i) {
  const int nz = inst.states();
  detail::require_dims(kappa_minus_i.size() == (inst.agents() - 1) * nz, "opponents' gains");
  if (!kappa_minus_i.allFinite()) throw NumericalError("numerical breakdown: non-finite gains");
  Eigen::MatrixXd A_i = inst.A;
  for (int j = 0, slot = 0; j < inst.agents(); ++j) {
    if (j == i) continue;
    A_i += inst.B[j] * kappa_minus_i.segment(slot * nz, nz).transpose();
    ++slot;
  }
  return lqr_react_for(inst, i, A_i);
}

class LqrAgent final : public AgentOracle {
 public:
  LqrAgent(std::shared_ptr<const LqrInstance> inst, int index) : inst_(std::move(inst)), index_(index) {}
  int output_dim() const override { return inst_->states(); }
  int input_dim() const override { return (inst_->agents() - 1) * inst_->states(); }
  Reaction react(const Eigen::VectorXd& x_minus_i) const override { return lqr_react(*inst_, index_, x_minus_i); }

 private:
  std::shared_ptr<const LqrInstance> inst_;
  int index_;
};

/// Random unstable LTI model with N single-input agents:
/// n_z ~ U{N..3N}, n_y ~ U{N..2N}, n_{y_i} ~ U{2..n_y}, r_i ~ U(1, 10),
/// Q_i = W W' with W ~ U(0, 1). A is Gaussian, rescaled to a spectral radius
/// drawn from U(1.05, 1.5); C_i takes n_{y_i} distinct rows of a Gaussian C.
/// Rejection-samples until every (A, B_i) is controllable and every
/// (A, C_i) observable.
inline LqrInstance random_lqr_instance(std::mt19937_64& rng, int agents = 3) {
  if (agents < 2) throw DimensionError("LQR game needs at least two agents");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto gaussian = [&](int rows, int cols) {
    Eigen::MatrixXd M(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) M(r, c) = gauss(rng);
    return M;
  };

  for (int attempt = 0; attempt < 1000; ++attempt) {
    LqrInstance inst;
    const int nz = uniform_int(agents, 3 * agents);
    const int ny = uniform_int(agents, 2 * agents);
    inst.A = gaussian(nz, nz);
    const double rho = spectral_radius(inst.A);
    if (!(rho > 0)) continue;
    inst.A *= (1.05 + 0.45 * unit(rng)) / rho;
    inst.C = gaussian(ny, nz);
    for (int i = 0; i < agents; ++i) {
      inst.B.push_back(gaussian(nz, 1).col(0));
      const int nyi = uniform_int(2, std::max(2, ny));
      std::vector<int> rows(ny);
      std::iota(rows.begin(), rows.end(), 0);
      std::shuffle(rows.begin(), rows.end(), rng);
      Eigen::MatrixXd Ci(std::min(nyi, ny), nz);
      for (int k = 0; k < Ci.rows(); ++k) Ci.row(k) = inst.C.row(rows[k]);
      inst.C_agent.push_back(Ci);
      Eigen::MatrixXd W(Ci.rows(), Ci.rows());
      for (int c = 0; c < W.cols(); ++c)
        for (int r = 0; r < W.rows(); ++r) W(r, c) = unit(rng);
      inst.Q.push_back(W * W.transpose());
      inst.r.push_back(1.0 + 9.0 * unit(rng));
    }
    bool ok = spectral_radius(inst.A) > 1.0;
    for (int i = 0; ok && i < agents; ++i) {
      ok = controllable(inst.A, inst.B[i]) && observable(inst.A, inst.C_agent[i]);
    }
    if (ok) return inst;
  }
  throw Error("generation failed: no controllable/observable LQR instance in 1000 attempts");
}

/// Stacked gains of a centralized LQR (Q = C'C, R = I) designed on A + delta.
/// nullopt if that design has no stabilizing solution.
inline std::optional<Eigen::VectorXd> centralized_gains(const LqrInstance& inst, const Eigen::MatrixXd& A_design) {
  const Eigen::MatrixXd B = inst.B_all();
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(inst.agents(), inst.agents());
  const auto P = dare_solve(A_design, B, inst.C.transpose() * inst.C, R);
  if (!P) return std::nullopt;
  const Eigen::MatrixXd K = lqr_gain(A_design, B, R, *P);
  Eigen::VectorXd gains(inst.agents() * inst.states());
  for (int i = 0; i < inst.agents(); ++i) gains.segment(i * inst.states(), inst.states()) = -K.row(i).transpose();
  return gains;
}

/// Passive-phase draws are centralized LQR gains computed on a perturbed A
/// (entrywise additive U(-perturbation, perturbation)), clipped into Omega.
inline Game lqr_game(LqrInstance instance, double perturbation = 0.05) {
  auto inst = std::make_shared<const LqrInstance>(std::move(instance));
  const int N = inst->agents();
  const int nz = inst->states();
  Game g;
  g.name = "lqr_random";
  g.partition = Partition(std::vector<int>(N, nz));
  g.omega = Polytope::box(N * nz, -inst->gain_bound, inst->gain_bound);
  for (int i = 0; i < N; ++i) g.agents.push_back(std::make_shared<LqrAgent>(inst, i));
  g.range_lower = g.omega.lower();
  g.range_upper = g.omega.upper();
  const Polytope omega = g.omega;
  g.init_sampler = [inst, perturbation, omega](std::mt19937_64& rng) -> Eigen::VectorXd {
    std::uniform_real_distribution<double> noise(-perturbation, perturbation);
    for (int attempt = 0; attempt < 20; ++attempt) {
      Eigen::MatrixXd A_design = inst->A;
      for (Eigen::Index c = 0; c < A_design.cols(); ++c)
        for (Eigen::Index r = 0; r < A_design.rows(); ++r) A_design(r, c) += noise(rng);
      if (auto gains = centralized_gains(*inst, A_design)) return omega.clip(*gains);
    }
    throw NumericalError("no stabilizing centralized design for the perturbed model");
  };
  return g;
}

}  // namespace statseek::agents
