#pragma once

// Affine surrogates of the action-reaction mappings,
//
//   f_i(x_{-i}) ~= Lambda_i [x_{-i}; 1],   Lambda_i = [nu | c],
//
// and the recursive estimator that learns them: one Kalman filter per output
// component, all sharing the regressor phi = [x_{-i}; 1].

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "statseek/errors.hpp"

namespace statseek {

namespace detail {

/// theta' [x; 1] summed left to right. Both prediction and the filter's
/// innovation go through here so that a zero innovation is exactly zero.
template <class Row>
double affine_eval(const Row& theta, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) acc += theta(k) * x[k];
  return acc + theta(x.size());
}

}  // namespace detail

class AffineSurrogate {
 public:
  AffineSurrogate() = default;

  /// coefficients is n_i x (n_{-i} + 1), last column the offset.
  explicit AffineSurrogate(Eigen::MatrixXd coefficients) : lambda_(std::move(coefficients)) {
    if (lambda_.cols() < 1 || lambda_.rows() < 1) throw DimensionError("empty surrogate");
    if (!lambda_.allFinite()) throw NumericalError("numerical breakdown: non-finite surrogate");
  }

  AffineSurrogate(const Eigen::MatrixXd& nu, const Eigen::VectorXd& c) {
    detail::require_dims(nu.rows() == c.size(), "surrogate nu rows vs offsets");
    lambda_.resize(nu.rows(), nu.cols() + 1);
    lambda_.leftCols(nu.cols()) = nu;
    lambda_.col(nu.cols()) = c;
    if (!lambda_.allFinite()) throw NumericalError("numerical breakdown: non-finite surrogate");
  }

  static AffineSurrogate zero(int outputs, int inputs) {
    return AffineSurrogate(Eigen::MatrixXd::Zero(outputs, inputs + 1));
  }

  int outputs() const { return static_cast<int>(lambda_.rows()); }
  int inputs() const { return static_cast<int>(lambda_.cols()) - 1; }

  Eigen::MatrixXd nu() const { return lambda_.leftCols(inputs()); }
  Eigen::VectorXd c() const { return lambda_.col(inputs()); }
  const Eigen::MatrixXd& coefficients() const { return lambda_; }

  /// theta_i: Lambda_i flattened row by row (one output component at a time).
  Eigen::VectorXd theta() const {
    Eigen::VectorXd t(lambda_.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < lambda_.rows(); ++r)
      for (Eigen::Index c = 0; c < lambda_.cols(); ++c) t[k++] = lambda_(r, c);
    return t;
  }

  static AffineSurrogate from_theta(const Eigen::VectorXd& theta, int outputs) {
    detail::require_dims(outputs > 0 && theta.size() % outputs == 0, "theta length vs outputs");
    const Eigen::Index cols = theta.size() / outputs;
    Eigen::MatrixXd m(outputs, cols);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < outputs; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = theta[k++];
    return AffineSurrogate(std::move(m));
  }

 private:
  Eigen::MatrixXd lambda_;
};

inline Eigen::VectorXd predict(const AffineSurrogate& s, const Eigen::VectorXd& x_minus_i) {
  detail::require_dims(x_minus_i.size() == s.inputs(), "predict input");
  Eigen::VectorXd out(s.outputs());
  for (int j = 0; j < s.outputs(); ++j) out[j] = detail::affine_eval(s.coefficients().row(j), x_minus_i);
  return out;
}

/// Append-only record of (query x_{-i}, reaction x_i) pairs.
class SampleLog {
 public:
  struct Sample {
    Eigen::VectorXd query;
    Eigen::VectorXd reaction;
    int iteration = 0;
  };

  SampleLog(int outputs, int inputs) : outputs_(outputs), inputs_(inputs) {}

  void append(Eigen::VectorXd query, Eigen::VectorXd reaction, int iteration) {
    detail::require_dims(query.size() == inputs_, "sample query");
    detail::require_dims(reaction.size() == outputs_, "sample reaction");
    samples_.push_back({std::move(query), std::move(reaction), iteration});
  }

  int outputs() const { return outputs_; }
  int inputs() const { return inputs_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  int outputs_;
  int inputs_;
  std::vector<Sample> samples_;
};

/// Bank of scalar Kalman filters, one per output component of f_i. The
/// parameter vector follows a random walk with covariance beta*I and is
/// observed through x_ij = phi'theta_j + unit-variance noise; P starts at
/// alpha*I, i.e. ridge regularization with weight 1/alpha.
///
/// P is carried as a square-root factor S (P = S S'). With alpha around 1e9
/// the plain downdate P - a a'/(1 + phi'a) cancels most significant digits
/// and the fit stalls well above the data's accuracy.
class KalmanBank {
 public:
  KalmanBank(int outputs, int inputs, double alpha, double beta)
      : alpha_(alpha), beta_(beta), theta_(Eigen::MatrixXd::Zero(outputs, inputs + 1)) {
    if (!(alpha > 0)) throw Error("KalmanBank: alpha must be > 0");
    if (!(beta >= 0)) throw Error("KalmanBank: beta must be >= 0");
    if (outputs < 1 || inputs < 0) throw DimensionError("KalmanBank dimensions");
    S_.assign(outputs, std::sqrt(alpha) * Eigen::MatrixXd::Identity(inputs + 1, inputs + 1));
  }

  int outputs() const { return static_cast<int>(theta_.rows()); }
  int inputs() const { return static_cast<int>(theta_.cols()) - 1; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  /// Row j holds theta_j.
  const Eigen::MatrixXd& theta() const { return theta_; }
  Eigen::MatrixXd covariance(int j) const {
    const Eigen::MatrixXd& S = S_.at(j);
    return S * S.transpose();
  }
  AffineSurrogate surrogate() const { return AffineSurrogate(theta_); }

  /// One measurement update with regressor [x_minus_i; 1] followed by the
  /// random-walk time update. Throws NumericalError on non-finite values and
  /// InvariantViolation if a covariance stops being positive definite.
  void update(const Eigen::VectorXd& x_minus_i, const Eigen::VectorXd& reaction) {
    detail::require_dims(x_minus_i.size() == inputs(), "kf_step query");
    detail::require_dims(reaction.size() == outputs(), "kf_step reaction");
    if (!x_minus_i.allFinite() || !reaction.allFinite()) {
      throw NumericalError("numerical breakdown: non-finite sample");
    }
    const Eigen::Index d = theta_.cols();
    Eigen::VectorXd phi(d);
    phi.head(d - 1) = x_minus_i;
    phi[d - 1] = 1.0;

    for (int j = 0; j < outputs(); ++j) {
      Eigen::MatrixXd& S = S_[j];
      // Potter measurement update: S <- S (I - c f f'), P_half phi = S f / sigma
      const Eigen::VectorXd f = S.transpose() * phi;
      const double sigma = 1.0 + f.squaredNorm();
      const Eigen::VectorXd Sf = S * f;
      const double innovation = reaction[j] - detail::affine_eval(theta_.row(j), x_minus_i);
      if (innovation != 0.0) theta_.row(j) += (Sf * (innovation / sigma)).transpose();
      S -= (Sf / (sigma + std::sqrt(sigma))) * f.transpose();
      // P_half + beta I = R'R from the QR of [S'; sqrt(beta) I]; keeps S triangular
      Eigen::MatrixXd stacked(2 * d, d);
      stacked << S.transpose(), std::sqrt(beta_) * Eigen::MatrixXd::Identity(d, d);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
      S = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>().transpose();
      if (!S.allFinite() || !theta_.row(j).allFinite()) {
        throw NumericalError("numerical breakdown in Kalman update");
      }
      if (!(S.diagonal().cwiseAbs().minCoeff() > 0.0)) {
        throw InvariantViolation("Kalman covariance lost positive definiteness");
      }
    }
  }

 private:
  double alpha_;
  double beta_;
  Eigen::MatrixXd theta_;
  std::vector<Eigen::MatrixXd> S_;
};

inline KalmanBank kf_step(KalmanBank bank, const Eigen::VectorXd& x_minus_i, const Eigen::VectorXd& reaction) {
  bank.update(x_minus_i, reaction);
  return bank;
}

/// Ridge least squares over the whole log, per output component:
///   argmin sum_t (x_ij^t - phi_t'theta)^2 + (1/alpha) ||theta||^2.
/// Solved as a stacked QR problem rather than through the normal equations.
inline AffineSurrogate batch_refit(const SampleLog& log, double alpha) {
  if (log.empty()) throw Error("batch_refit: empty sample log");
  if (!(alpha > 0)) throw Error("batch_refit: alpha must be > 0");
  const int k = static_cast<int>(log.size());
  const int d = log.inputs() + 1;
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(k + d, d);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(k + d, log.outputs());
  for (int t = 0; t < k; ++t) {
    const auto& s = log.samples()[t];
    design.block(t, 0, 1, d - 1) = s.query.transpose();
    design(t, d - 1) = 1.0;
    targets.row(t) = s.reaction.transpose();
  }
  design.bottomRows(d) = Eigen::MatrixXd::Identity(d, d) / std::sqrt(alpha);
  const Eigen::MatrixXd theta = design.colPivHouseholderQr().solve(targets);
  return AffineSurrogate(Eigen::MatrixXd(theta.transpose()));
}

/// Mean squared prediction error over the log.
inline double residual_mse(const AffineSurrogate& s, const SampleLog& log) {
  if (log.empty()) throw Error("residual_mse: empty sample log");
  double acc = 0.0;
  for (const auto& sample : log.samples()) acc += (sample.reaction - predict(s, sample.query)).squaredNorm();
  return acc / static_cast<double>(log.size());
}

}  // namespace statseek
