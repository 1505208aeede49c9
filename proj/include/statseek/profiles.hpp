#pragma once

// Partitioned decision profiles and the polytope of feasible collective
// actions.

#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "statseek/errors.hpp"

namespace statseek {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultTolFeas = 1e-8;
inline constexpr double kDefaultTolKkt = 1e-8;

/// Block sizes n_1..n_N of a stacked decision vector.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw DimensionError("partition needs at least one agent");
    offsets_.reserve(sizes_.size());
    int acc = 0;
    for (int s : sizes_) {
      if (s < 1) throw DimensionError("partition sizes must be >= 1");
      offsets_.push_back(acc);
      acc += s;
    }
    total_ = acc;
  }

  /// N scalar agents.
  static Partition scalar(int agents) { return Partition(std::vector<int>(agents, 1)); }

  int agents() const { return static_cast<int>(sizes_.size()); }
  int total() const { return total_; }
  int size(int i) const { return sizes_.at(i); }
  int offset(int i) const { return offsets_.at(i); }
  /// n_{-i}
  int complement_size(int i) const { return total_ - size(i); }
  const std::vector<int>& sizes() const { return sizes_; }

  Eigen::VectorXd block(const Eigen::VectorXd& x, int i) const {
    detail::require_dims(x.size() == total_, "profile length");
    return x.segment(offset(i), size(i));
  }

  /// Opponents' block x_{-i}, in agent order with block i removed.
  Eigen::VectorXd complement(const Eigen::VectorXd& x, int i) const {
    detail::require_dims(x.size() == total_, "profile length");
    Eigen::VectorXd out(complement_size(i));
    const int off = offset(i);
    const int tail = total_ - off - size(i);
    out.head(off) = x.head(off);
    out.tail(tail) = x.tail(tail);
    return out;
  }

  /// Inverse of (block, complement).
  Eigen::VectorXd compose(const Eigen::VectorXd& own, const Eigen::VectorXd& others,
                          int i) const {
    detail::require_dims(own.size() == size(i), "own block length");
    detail::require_dims(others.size() == complement_size(i), "complement length");
    Eigen::VectorXd x(total_);
    const int off = offset(i);
    const int tail = total_ - off - size(i);
    x.head(off) = others.head(off);
    x.segment(off, size(i)) = own;
    x.tail(tail) = others.tail(tail);
    return x;
  }

  /// Column indices of the complement block inside the full profile.
  std::vector<int> complement_indices(int i) const {
    std::vector<int> idx;
    idx.reserve(complement_size(i));
    for (int k = 0; k < total_; ++k) {
      if (k < offset(i) || k >= offset(i) + size(i)) idx.push_back(k);
    }
    return idx;
  }

  bool operator==(const Partition& o) const { return sizes_ == o.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int total_ = 0;
};

/// A stacked decision vector together with its partition.
struct CollectiveProfile {
  CollectiveProfile(Eigen::VectorXd v, Partition p) : values(std::move(v)), partition(std::move(p)) {
    detail::require_dims(values.size() == partition.total(), "profile length");
  }

  Eigen::VectorXd block(int i) const { return partition.block(values, i); }
  Eigen::VectorXd complement(int i) const { return partition.complement(values, i); }

  Eigen::VectorXd values;
  Partition partition;
};

/// Omega = { x : lower <= x <= upper, A x <= b }.
class Polytope {
 public:
  Polytope() = default;

  Polytope(Eigen::VectorXd lower, Eigen::VectorXd upper)
      : Polytope(std::move(lower), std::move(upper), Eigen::MatrixXd(0, 0), Eigen::VectorXd()) {}

  Polytope(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::MatrixXd A, Eigen::VectorXd b)
      : lower_(std::move(lower)), upper_(std::move(upper)), A_(std::move(A)), b_(std::move(b)) {
    detail::require_dims(lower_.size() == upper_.size(), "polytope bounds");
    if (A_.size() == 0) A_.resize(0, lower_.size());
    detail::require_dims(A_.cols() == lower_.size(), "inequality matrix columns");
    detail::require_dims(A_.rows() == b_.size(), "inequality rhs");
    for (Eigen::Index k = 0; k < lower_.size(); ++k) {
      if (std::isnan(lower_[k]) || std::isnan(upper_[k]) || lower_[k] > upper_[k]) {
        throw InfeasibleError("empty feasible set: lower > upper");
      }
    }
  }

  static Polytope box(int n, double lo, double hi) {
    return Polytope(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi));
  }
  static Polytope unbounded(int n) { return box(n, -kInf, kInf); }

  int dim() const { return static_cast<int>(lower_.size()); }
  int inequalities() const { return static_cast<int>(A_.rows()); }
  bool is_box() const { return A_.rows() == 0; }

  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }

  Eigen::VectorXd clip(const Eigen::VectorXd& x) const {
    detail::require_dims(x.size() == dim(), "point vs polytope");
    return x.cwiseMax(lower_).cwiseMin(upper_);
  }

  /// Largest constraint violation (0 if feasible).
  double violation(const Eigen::VectorXd& x) const {
    detail::require_dims(x.size() == dim(), "point vs polytope");
    double v = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      v = std::max({v, lower_[k] - x[k], x[k] - upper_[k]});
    }
    if (A_.rows() > 0) v = std::max(v, (A_ * x - b_).maxCoeff());
    return v;
  }

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

inline bool contains(const Polytope& poly, const Eigen::VectorXd& x, double tol = kDefaultTolFeas) {
  if (tol < 0) throw Error("contains: negative tolerance");
  if (!x.allFinite()) {
    detail::require_dims(x.size() == poly.dim(), "point vs polytope");
    return false;
  }
  return poly.violation(x) <= tol;
}

}  // namespace statseek
