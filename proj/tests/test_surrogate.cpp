#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "statseek/surrogate.hpp"

using namespace statseek;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

}  // namespace

TEST(Surrogate, PredictExamples) {
  EXPECT_DOUBLE_EQ(predict(AffineSurrogate(Eigen::MatrixXd::Zero(1, 2), vec({3})), vec({-4, 9}))[0], 3.0);
  Eigen::MatrixXd nu(1, 2);
  nu << 1, 2;
  EXPECT_DOUBLE_EQ(predict(AffineSurrogate(nu, vec({3})), vec({1, 1}))[0], 6.0);
  EXPECT_EQ(predict(AffineSurrogate::zero(2, 3), vec({1, 2, 3})), Eigen::VectorXd::Zero(2));
  EXPECT_THROW(predict(AffineSurrogate::zero(1, 2), vec({1})), DimensionError);
}

TEST(Surrogate, ThetaRoundTrip) {
  Eigen::MatrixXd lam(2, 3);
  lam << 1, 2, 3, 4, 5, 6;
  const AffineSurrogate s(lam);
  EXPECT_EQ(s.theta(), vec({1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(AffineSurrogate::from_theta(s.theta(), 2).coefficients(), lam);
  EXPECT_EQ(s.c(), vec({3, 6}));
}

TEST(KalmanBank, ScalarHandComputedStep) {
  KalmanBank bank(1, 1, 1.0, 0.0);
  bank.update(vec({1}), vec({1}));
  EXPECT_NEAR(bank.theta()(0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(bank.theta()(0, 1), 1.0 / 3.0, 1e-15);
  Eigen::Matrix2d expect;
  expect << 2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0;
  EXPECT_LE((bank.covariance(0) - expect).norm(), 1e-15);
}

TEST(KalmanBank, ZeroInnovationKeepsTheta) {
  const double alpha = 5.0, beta = 0.25;
  KalmanBank bank(1, 2, alpha, beta);
  const Eigen::VectorXd x = vec({0.5, -2});
  // theta = 0 so a zero reaction is an exact prediction
  bank.update(x, vec({0}));
  EXPECT_EQ(bank.theta(), Eigen::MatrixXd::Zero(1, 3));
  const Eigen::Vector3d phi(0.5, -2, 1);
  const Eigen::Matrix3d expect = alpha * Eigen::Matrix3d::Identity() -
                                 alpha * alpha * phi * phi.transpose() / (1 + alpha * phi.squaredNorm()) +
                                 beta * Eigen::Matrix3d::Identity();
  EXPECT_LE((bank.covariance(0) - expect).norm(), 1e-12);

  // and again from a non-zero theta
  KalmanBank warm(1, 2, alpha, beta);
  warm.update(vec({1, 1}), vec({2}));
  const Eigen::MatrixXd before = warm.theta();
  warm.update(x, predict(warm.surrogate(), x));
  EXPECT_EQ(warm.theta(), before);
}

TEST(KalmanBank, BetaZeroMatchesRidgeOnRandomLogs) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int inputs = 1 + t % 4;
    const int outputs = 1 + t % 2;
    const int k = 3 + t % 17;
    const double alpha = std::pow(10.0, -1.0 + t % 6);
    KalmanBank bank(outputs, inputs, alpha, 0.0);
    SampleLog log(outputs, inputs);
    Eigen::MatrixXd Phi(k, inputs + 1);
    Eigen::MatrixXd Y(k, outputs);
    for (int s = 0; s < k; ++s) {
      const Eigen::VectorXd x = oracle::random_vector(rng, inputs, -2, 2);
      const Eigen::VectorXd y = oracle::random_vector(rng, outputs, -2, 2);
      bank.update(x, y);
      log.append(x, y, s + 1);
      Phi.row(s).head(inputs) = x.transpose();
      Phi(s, inputs) = 1.0;
      Y.row(s) = y.transpose();
    }
    const AffineSurrogate batch = batch_refit(log, alpha);
    for (int j = 0; j < outputs; ++j) {
      const Eigen::VectorXd ref = oracle::ridge(Phi, Y.col(j), alpha);
      const double rel = (bank.theta().row(j).transpose() - ref).norm() / std::max(1.0, ref.norm());
      const double rel_batch = (batch.coefficients().row(j).transpose() - ref).norm() / std::max(1.0, ref.norm());
      worst = std::max({worst, rel, rel_batch});
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(BatchRefit, SingleSampleMinNorm) {
  SampleLog log(1, 1);
  log.append(vec({0}), vec({2}), 1);
  const AffineSurrogate s = batch_refit(log, 1e12);
  EXPECT_NEAR(s.coefficients()(0, 0), 0.0, 1e-9);
  EXPECT_NEAR(s.coefficients()(0, 1), 2.0, 1e-9);

  SampleLog twice(1, 1);
  twice.append(vec({0}), vec({2}), 1);
  twice.append(vec({0}), vec({2}), 2);
  const AffineSurrogate d = batch_refit(twice, 1e12);
  EXPECT_NEAR(d.coefficients()(0, 1), 2.0, 1e-9);
  EXPECT_NEAR(d.coefficients()(0, 0), 0.0, 1e-9);
}

TEST(BatchRefit, RecoversAffineMap) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd nu = oracle::random_matrix(rng, 2, 3);
  const Eigen::VectorXd c = oracle::random_vector(rng, 2);
  SampleLog log(2, 3);
  for (int s = 0; s < 8; ++s) {
    const Eigen::VectorXd x = oracle::random_vector(rng, 3, -5, 5);
    log.append(x, nu * x + c, s + 1);
  }
  const AffineSurrogate fit = batch_refit(log, 1e12);
  EXPECT_LE((fit.nu() - nu).norm(), 1e-6);
  EXPECT_LE((fit.c() - c).norm(), 1e-6);
  EXPECT_LE(residual_mse(fit, log), 1e-12);
}

TEST(BatchRefit, Errors) {
  EXPECT_THROW(batch_refit(SampleLog(1, 1), 1.0), Error);
  SampleLog log(1, 1);
  log.append(vec({1}), vec({1}), 1);
  EXPECT_THROW(batch_refit(log, 0.0), Error);
  EXPECT_THROW(log.append(vec({1, 2}), vec({1}), 2), DimensionError);
}

TEST(ResidualMse, ConstantSurrogate) {
  SampleLog log(1, 1);
  log.append(vec({0}), vec({1}), 1);
  log.append(vec({0}), vec({3}), 2);
  EXPECT_DOUBLE_EQ(residual_mse(AffineSurrogate(Eigen::MatrixXd::Zero(1, 1), vec({2})), log), 1.0);
}

TEST(KalmanBank, ConsistencyOnRepeatedSample) {
  KalmanBank bank(1, 2, 1e3, 1.0);
  const Eigen::VectorXd x = vec({0.7, -1.3});
  const Eigen::VectorXd y = vec({4.2});
  double prev = std::abs(predict(bank.surrogate(), x)[0] - y[0]);
  for (int k = 0; k < 200; ++k) {
    bank.update(x, y);
    const double err = std::abs(predict(bank.surrogate(), x)[0] - y[0]);
    EXPECT_LE(err, prev);
    prev = err;
  }
  EXPECT_LE(prev, 1e-6);
}

TEST(KalmanBank, CovarianceStaysPositiveDefinite) {
  std::mt19937_64 rng(9);
  KalmanBank bank(2, 3, 1e9, 1.0);
  for (int k = 0; k < 300; ++k) {
    bank.update(oracle::random_vector(rng, 3, 0, 100), oracle::random_vector(rng, 2, 0, 100));
    for (int j = 0; j < 2; ++j) {
      const auto ev = oracle::jacobi_eigenvalues(bank.covariance(j));
      EXPECT_GT(ev.front(), 0.0);
      EXPECT_LE((bank.covariance(j) - bank.covariance(j).transpose()).norm(), 0.0);
    }
  }
}

TEST(KalmanBank, RejectsBadInput) {
  EXPECT_THROW(KalmanBank(1, 1, 0.0, 1.0), Error);
  EXPECT_THROW(KalmanBank(1, 1, 1.0, -1.0), Error);
  KalmanBank bank(1, 1, 1.0, 0.0);
  EXPECT_THROW(bank.update(vec({NAN}), vec({1})), NumericalError);
  EXPECT_THROW(bank.update(vec({1, 2}), vec({1})), DimensionError);
}
