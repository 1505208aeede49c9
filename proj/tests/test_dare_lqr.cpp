#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "statseek/agents/dare.hpp"
#include "statseek/agents/lqr.hpp"

using namespace statseek;
using namespace statseek::agents;

namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

LqrInstance scalar_instance() {
  LqrInstance inst;
  inst.A = scalar(0.5);
  inst.B = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  inst.C = scalar(1);
  inst.C_agent = {scalar(1), scalar(1)};
  inst.Q = {scalar(1), scalar(1)};
  inst.r = {1, 1};
  return inst;
}

}  // namespace

TEST(Dare, ScalarClosedForm) {
  const auto P = dare_solve(scalar(0.5), scalar(1), scalar(1), scalar(1));
  ASSERT_TRUE(P);
  EXPECT_NEAR((*P)(0, 0), (0.25 + std::sqrt(4.0625)) / 2.0, 1e-9);
}

TEST(Dare, ZeroDynamics) {
  Eigen::MatrixXd Q(2, 2);
  Q << 2, 0.5, 0.5, 1;
  const auto P = dare_solve(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(2, 1), Q, scalar(1));
  ASSERT_TRUE(P);
  EXPECT_LE((*P - Q).norm(), 1e-12);
}

TEST(Dare, RandomInstances) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss;
  int solved = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 6;
    const int m = 1 + t % 2;
    Eigen::MatrixXd A(n, n), B(n, m);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) A(r, c) = gauss(rng);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < n; ++r) B(r, c) = gauss(rng);
    A *= 1.3 / spectral_radius(A);
    ASSERT_TRUE(controllable(A, B));
    const Eigen::MatrixXd W = oracle::random_matrix(rng, n, n);
    const Eigen::MatrixXd Q = W * W.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(m, m);
    const auto P = dare_solve(A, B, Q, R);
    ASSERT_TRUE(P) << "instance " << t;
    EXPECT_LE(dare_residual(A, B, Q, R, *P), 1e-9 * (1 + P->norm()));
    EXPECT_LT(spectral_radius(A - B * lqr_gain(A, B, R, *P)), 1.0);
    EXPECT_GT(oracle::jacobi_eigenvalues(*P).front(), 0.0);
    ++solved;
  }
  EXPECT_EQ(solved, 50);
}

TEST(Dare, UnstabilizableHasNoSolution) {
  // unstable mode the input cannot reach
  Eigen::MatrixXd A(2, 2);
  A << 2, 0, 0, 0.5;
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  EXPECT_FALSE(dare_solve(A, B, Eigen::MatrixXd::Identity(2, 2), scalar(1)));
}

TEST(Lqr, SignConvention) {
  const LqrInstance inst = scalar_instance();
  const double p = (0.25 + std::sqrt(4.0625)) / 2.0;
  const auto r = lqr_react(inst, 0, Eigen::VectorXd::Zero(1));
  EXPECT_FALSE(r.distress);
  EXPECT_NEAR(r.action[0], -p * 0.5 / (1 + p), 1e-9);
  EXPECT_NEAR(r.action[0], -0.26556, 1e-5);
  // the agent's own closed loop is stable
  EXPECT_LT(std::abs(0.5 + r.action[0]), 1.0);
}

TEST(Lqr, OpponentGainsShiftTheModel) {
  const LqrInstance inst = scalar_instance();
  const auto shifted = lqr_react(inst, 0, Eigen::VectorXd::Constant(1, 0.3));
  const auto P = dare_solve(scalar(0.8), scalar(1), scalar(1), scalar(1));
  ASSERT_TRUE(P);
  EXPECT_NEAR(shifted.action[0], -(*P)(0, 0) * 0.8 / (1 + (*P)(0, 0)), 1e-9);
}

TEST(Lqr, GainsAreClipped) {
  LqrInstance inst = scalar_instance();
  inst.A = scalar(100);
  const auto r = lqr_react(inst, 0, Eigen::VectorXd::Zero(1));
  EXPECT_DOUBLE_EQ(r.action[0], -20.0);
}

TEST(Lqr, RandomInstanceProperties) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    std::mt19937_64 rng(seed);
    const LqrInstance inst = random_lqr_instance(rng, 3);
    EXPECT_EQ(inst.agents(), 3);
    EXPECT_GE(inst.states(), 3);
    EXPECT_LE(inst.states(), 9);
    const double rho = spectral_radius(inst.A);
    EXPECT_GT(rho, 1.05 - 1e-9);
    EXPECT_LT(rho, 1.5 + 1e-9);
    for (int i = 0; i < 3; ++i) {
      EXPECT_TRUE(controllable(inst.A, inst.B[i]));
      EXPECT_TRUE(observable(inst.A, inst.C_agent[i]));
      EXPECT_GE(inst.r[i], 1.0);
      EXPECT_LE(inst.r[i], 10.0);
      EXPECT_GE(oracle::jacobi_eigenvalues(inst.Q[i]).front(), -1e-12);
    }
  }
}

TEST(Lqr, RandomInstanceIsDeterministic) {
  std::mt19937_64 a(5), b(5);
  const LqrInstance x = random_lqr_instance(a), y = random_lqr_instance(b);
  EXPECT_EQ(x.A, y.A);
  EXPECT_EQ(x.C, y.C);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(x.B[i], y.B[i]);
    EXPECT_EQ(x.Q[i], y.Q[i]);
    EXPECT_EQ(x.r[i], y.r[i]);
  }
}

TEST(Lqr, GameSamplerStaysInBox) {
  std::mt19937_64 rng(1);
  const Game g = lqr_game(random_lqr_instance(rng));
  std::mt19937_64 draw(3);
  for (int k = 0; k < 5; ++k) EXPECT_TRUE(contains(g.omega, g.init_sampler(draw)));
}
