#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "statseek/qp.hpp"

using namespace statseek;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n) {
  const Eigen::MatrixXd M = oracle::random_matrix(rng, n, n);
  return M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST(Qp, InteriorOptimum) {
  const auto sol = qp_solve(2 * Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4), Polytope::box(4, -1, 1));
  EXPECT_LE(sol.x.norm(), 1e-12);
}

TEST(Qp, ClippedDiagonal) {
  Eigen::VectorXd g(2);
  g << -6, 0;
  const auto sol = qp_solve(2 * Eigen::MatrixXd::Identity(2, 2), g, Polytope::box(2, -1, 1));
  EXPECT_NEAR(sol.x[0], 1.0, 1e-12);
  EXPECT_NEAR(sol.x[1], 0.0, 1e-12);
  EXPECT_LE(sol.kkt_residual, 1e-8);
}

TEST(Qp, RandomBoxAgainstProjectedGradient) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 20;
    const Eigen::MatrixXd H = random_spd(rng, n);
    const Eigen::VectorXd g = oracle::random_vector(rng, n, -5, 5);
    const Eigen::VectorXd lo = oracle::random_vector(rng, n, -2, 0);
    const Eigen::VectorXd hi = lo + oracle::random_vector(rng, n, 0.1, 2);
    const auto sol = qp_solve(H, g, Polytope(lo, hi));
    ASSERT_LE(sol.kkt_residual, 1e-8) << "problem " << t;
    EXPECT_LE((sol.x - oracle::projected_gradient_box(H, g, lo, hi)).norm(), 1e-6) << "problem " << t;
  }
}

TEST(Qp, GeneralPolytopeAgainstEnumeration) {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const int n = 2 + t % 3;
    const Eigen::MatrixXd H = random_spd(rng, n);
    const Eigen::VectorXd g = oracle::random_vector(rng, n, -4, 4);
    const Eigen::MatrixXd A = oracle::random_matrix(rng, 2, n);
    const Eigen::VectorXd b = oracle::random_vector(rng, 2, 0.05, 0.6);
    const Polytope P(Eigen::VectorXd::Constant(n, -1), Eigen::VectorXd::Constant(n, 1), A, b);
    Eigen::MatrixXd C(2 * n + 2, n);
    Eigen::VectorXd d(2 * n + 2);
    C << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n), A;
    d << Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n), b;
    const auto ref = oracle::enumerate_qp(H, g, C, d);
    ASSERT_TRUE(ref.has_value());
    const auto sol = qp_solve(H, g, P);
    EXPECT_LE(sol.kkt_residual, 1e-8);
    EXPECT_LE((sol.x - *ref).norm(), 1e-6) << "problem " << t;
    ++checked;
  }
  EXPECT_EQ(checked, 60);
}

// three active rows meeting at one point of the plane
TEST(Qp, DegenerateVertex) {
  Eigen::MatrixXd H(2, 2);
  H << 3, 0.5, 0.5, 3;
  Eigen::VectorXd g(2), lo(2), hi(2);
  g << -0.65168454895007732, -0.55865925726850896;
  lo << 5.8576028891568521, -10;
  hi << 10, 10;
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  const Polytope P(lo, hi, A, Eigen::VectorXd::Constant(1, -4.1423971108431452));
  const auto sol = qp_solve(H, g, P);
  EXPECT_NEAR(sol.x[0], 5.8576028891568521, 1e-12);
  EXPECT_NEAR(sol.x[1], -10.0, 1e-12);
  EXPECT_LE(sol.kkt_residual, 1e-8);
}

TEST(Qp, PinnedCoordinateWithRow) {
  Eigen::VectorXd lo(3), hi(3);
  lo << 0.5, -1, -1;
  hi << 0.5, 1, 1;
  Eigen::MatrixXd A(1, 3);
  A << 1, 1, 1;
  const Polytope P(lo, hi, A, Eigen::VectorXd::Constant(1, 0.5));
  // minimize |x - (1,1,1)|^2: x1 fixed, remaining mass 0 split evenly
  const auto sol = qp_solve(2 * Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Constant(3, -2), P);
  EXPECT_NEAR(sol.x[0], 0.5, 1e-12);
  EXPECT_NEAR(sol.x[1], 0.0, 1e-12);
  EXPECT_NEAR(sol.x[2], 0.0, 1e-12);
  EXPECT_LE(sol.kkt_residual, 1e-8);
}

TEST(Qp, SemidefiniteWithRow) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 2);
  H(0, 0) = 1;
  Eigen::VectorXd g(2);
  g << 0, -1;
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  const Polytope P(Eigen::VectorXd::Constant(2, -1), Eigen::VectorXd::Constant(2, 1), A, Eigen::VectorXd::Constant(1, 0.5));
  const auto sol = qp_solve(H, g, P);
  EXPECT_NEAR(sol.x[0], -0.5, 1e-8);
  EXPECT_NEAR(sol.x[1], 1.0, 1e-8);
  EXPECT_LE(sol.kkt_residual, 1e-8);
}

TEST(Qp, RidgeMakesSingularProblemUnique) {
  Eigen::MatrixXd H(2, 2);
  H << 1, -1, -1, 1;
  const auto sol = qp_solve(H, Eigen::VectorXd::Zero(2), Polytope::box(2, -1, 1), 1e-8);
  EXPECT_LE(sol.x.norm(), 1e-6);
}

TEST(Qp, InfeasibleThrows) {
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  Eigen::VectorXd b(1);
  b << -5;
  const Polytope P(Eigen::VectorXd::Constant(2, -1), Eigen::VectorXd::Constant(2, 1), A, b);
  EXPECT_THROW(qp_solve(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), P), InfeasibleError);
}

TEST(Qp, DimensionAndFiniteness) {
  EXPECT_THROW(qp_solve(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(2), Polytope::box(2, 0, 1)),
               DimensionError);
  Eigen::VectorXd g(1);
  g << NAN;
  EXPECT_THROW(qp_solve(Eigen::MatrixXd::Identity(1, 1), g, Polytope::box(1, 0, 1)), NumericalError);
}

TEST(Qp, Deterministic) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd H = random_spd(rng, 6);
  const Eigen::VectorXd g = oracle::random_vector(rng, 6, -3, 3);
  const Eigen::MatrixXd A = oracle::random_matrix(rng, 1, 6);
  const Polytope P(Eigen::VectorXd::Constant(6, -1), Eigen::VectorXd::Constant(6, 1), A, Eigen::VectorXd::Constant(1, 0.2));
  EXPECT_EQ(qp_solve(H, g, P).x, qp_solve(H, g, P).x);
}
