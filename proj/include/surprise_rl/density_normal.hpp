#pragma once

#include "surprise_rl/common.hpp"

#include <cmath>
#include <deque>

namespace srl {

/// FIFO buffer of recent grayscale observations. Capacity is fixed at
/// construction (20x the rollout batch size in the training loop).
class ObsBuffer {
 public:
  ObsBuffer(Eigen::Index dim, size_t capacity) : dim_(dim), capacity_(capacity) {}

  /// Appends the rows of `batch`; evicts oldest rows so size() <= capacity().
  void push(const Mat& batch) {
    check_shape(batch.cols() == dim_ || batch.rows() == 0,
                "ObsBuffer::push: dimension mismatch");
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
      rows_.push_back(batch.row(r).transpose());
      if (rows_.size() > capacity_) rows_.pop_front();
    }
  }

  size_t size() const { return rows_.size(); }
  size_t capacity() const { return capacity_; }
  Eigen::Index dim() const { return dim_; }
  const Vec& row(size_t i) const { return rows_[i]; }

 private:
  Eigen::Index dim_;
  size_t capacity_;
  std::deque<Vec> rows_;
};

/// Independent per-dimension Gaussian fitted from the buffer.
struct NormalDensityParams {
  Vec mu;
  Vec sigma;          // standard deviation, floored
  int floored = 0;    // how many dimensions hit the floor in the last fit
};

/// Per-dimension sample mean and population (1/N) standard deviation over the
/// buffer, with sigma floored away from zero.
inline NormalDensityParams fit_params(const ObsBuffer& buf,
                                      double sigma_floor = 1e-3) {
  const size_t n = buf.size();
  if (n < 2) throw InsufficientDataError("fit_params: buffer holds fewer than 2 observations");

  NormalDensityParams p;
  p.mu = Vec::Zero(buf.dim());
  for (size_t i = 0; i < n; ++i) p.mu += buf.row(i);
  p.mu /= static_cast<double>(n);

  Vec var = Vec::Zero(buf.dim());
  for (size_t i = 0; i < n; ++i) {
    var += (buf.row(i) - p.mu).cwiseAbs2();
  }
  var /= static_cast<double>(n);

  p.sigma = var.cwiseSqrt();
  for (Eigen::Index d = 0; d < p.sigma.size(); ++d) {
    if (p.sigma[d] < sigma_floor) {
      p.sigma[d] = sigma_floor;
      ++p.floored;
    }
  }
  return p;
}

/// r_SM(s) = - sum_i ( log sigma_i + (s_i - mu_i)^2 / (2 sigma_i^2) ).
inline double sm_reward(const NormalDensityParams& params, const Vec& s) {
  check_shape(s.size() == params.mu.size(), "sm_reward: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double d = s[i] - params.mu[i];
    acc += std::log(params.sigma[i]) + d * d / (2.0 * params.sigma[i] * params.sigma[i]);
  }
  return -acc;
}

/// One reward per row of `batch`.
inline Vec sm_reward_batch(const NormalDensityParams& params, const Mat& batch) {
  check_shape(batch.cols() == params.mu.size(), "sm_reward_batch: dimension mismatch");
  const double log_sigma_sum = params.sigma.array().log().sum();
  const Vec inv_2var = (2.0 * params.sigma.array().square()).inverse();
  Vec out(batch.rows());
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const Vec d = batch.row(r).transpose() - params.mu;
    out[r] = -(log_sigma_sum + d.cwiseAbs2().dot(inv_2var));
  }
  return out;
}

}  // namespace srl
