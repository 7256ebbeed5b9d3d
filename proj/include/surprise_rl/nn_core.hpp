#pragma once

#include "surprise_rl/common.hpp"
#include "surprise_rl/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace srl {

enum class Activation { identity, tanh_fn, relu, softmax };

struct Layer {
  Mat W;  // in x out
  Vec b;  // out
  Activation act = Activation::identity;
};

struct MlpParams {
  std::vector<Layer> layers;
  uint64_t revision = 0;  // bumped on every optimizer step

  Eigen::Index in_dim() const { return layers.front().W.rows(); }
  Eigen::Index out_dim() const { return layers.back().W.cols(); }
};

/// Cached per-layer activations from the last tracked forward pass.
/// acts[0] is the input batch, acts[i] the post-activation output of layer i.
struct GradTape {
  std::vector<Mat> acts;
  uint64_t revision = 0;
  bool valid = false;
};

struct MlpGrads {
  std::vector<Mat> dW;
  std::vector<Vec> db;
};

namespace detail {

inline Mat apply_activation(const Mat& z, Activation act) {
  switch (act) {
    case Activation::identity:
      return z;
    case Activation::tanh_fn:
      return z.array().tanh();
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::softmax: {
      Mat out(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        Eigen::ArrayXd e = (z.row(r).array() - m).exp();
        out.row(r) = e / e.sum();
      }
      return out;
    }
  }
  return z;
}

// Maps upstream gradient w.r.t. the post-activation output y back to the
// pre-activation input, using y only (all four activations allow this).
inline Mat activation_backward(const Mat& y, const Mat& dy, Activation act) {
  switch (act) {
    case Activation::identity:
      return dy;
    case Activation::tanh_fn:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::relu:
      return (dy.array() * (y.array() > 0.0).cast<double>()).matrix();
    case Activation::softmax: {
      Mat dz(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = y.row(r).dot(dy.row(r));
        dz.row(r) = y.row(r).array() * (dy.row(r).array() - dot);
      }
      return dz;
    }
  }
  return dy;
}

}  // namespace detail

/// Affine + activation composition over the batch rows of x (B x in_dim).
/// Pass a tape to record activations for a subsequent backward().
inline Mat forward(const MlpParams& params, const Mat& x, GradTape* tape = nullptr) {
  check_shape(!params.layers.empty(), "forward: empty network");
  check_shape(x.cols() == params.in_dim(), "forward: input dimension mismatch");
  if (tape) {
    tape->acts.clear();
    tape->acts.reserve(params.layers.size() + 1);
    tape->acts.push_back(x);
    tape->revision = params.revision;
    tape->valid = true;
  }
  Mat cur = x;
  for (size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& l = params.layers[i];
    check_shape(cur.cols() == l.W.rows(), "forward: layer shape mismatch at layer " + std::to_string(i));
    Mat z = cur * l.W;
    z.rowwise() += l.b.transpose();
    cur = detail::apply_activation(z, l.act);
    if (!cur.allFinite()) {
      throw NumericError("forward: non-finite output at layer " + std::to_string(i));
    }
    if (tape) tape->acts.push_back(cur);
  }
  return cur;
}

/// Exact reverse-mode gradients of forward(). Returns (parameter grads, dL/dx).
inline std::pair<MlpGrads, Mat> backward(const MlpParams& params,
                                         const GradTape& tape, const Mat& dy) {
  if (!tape.valid || tape.acts.size() != params.layers.size() + 1 ||
      tape.revision != params.revision) {
    throw ContractError("backward: tape is stale or does not match the network");
  }
  check_shape(dy.rows() == tape.acts.back().rows() && dy.cols() == tape.acts.back().cols(),
              "backward: upstream gradient shape mismatch");

  MlpGrads grads;
  grads.dW.resize(params.layers.size());
  grads.db.resize(params.layers.size());

  Mat cur = dy;
  for (int i = static_cast<int>(params.layers.size()) - 1; i >= 0; --i) {
    const Layer& l = params.layers[static_cast<size_t>(i)];
    const Mat& y = tape.acts[static_cast<size_t>(i) + 1];
    const Mat& x = tape.acts[static_cast<size_t>(i)];
    Mat dz = detail::activation_backward(y, cur, l.act);
    grads.dW[static_cast<size_t>(i)] = x.transpose() * dz;
    grads.db[static_cast<size_t>(i)] = dz.colwise().sum().transpose();
    cur = dz * l.W.transpose();
  }
  return {std::move(grads), std::move(cur)};
}

/// mean + exp(log_var / 2) .* noise. Noise is caller-supplied for determinism.
inline Vec gaussian_sample(const Vec& mean, const Vec& log_var, const Vec& noise) {
  check_shape(mean.size() == log_var.size() && mean.size() == noise.size(),
              "gaussian_sample: shape mismatch");
  return mean.array() + (log_var.array() / 2.0).exp() * noise.array();
}

inline Mat gaussian_sample(const Mat& mean, const Mat& log_var, const Mat& noise) {
  check_shape(mean.rows() == log_var.rows() && mean.cols() == log_var.cols() &&
                  mean.rows() == noise.rows() && mean.cols() == noise.cols(),
              "gaussian_sample: shape mismatch");
  return mean.array() + (log_var.array() / 2.0).exp() * noise.array();
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long step = 0;
  std::vector<Mat> mW, vW;
  std::vector<Vec> mb, vb;
};

inline AdamState make_adam(const MlpParams& params, AdamConfig cfg = {}) {
  AdamState s;
  s.cfg = cfg;
  for (const Layer& l : params.layers) {
    s.mW.push_back(Mat::Zero(l.W.rows(), l.W.cols()));
    s.vW.push_back(Mat::Zero(l.W.rows(), l.W.cols()));
    s.mb.push_back(Vec::Zero(l.b.size()));
    s.vb.push_back(Vec::Zero(l.b.size()));
  }
  return s;
}

/// Bias-corrected Adam update, applied in place. Non-finite gradients throw
/// and leave parameters and moments untouched.
inline void adam_step(AdamState& opt, MlpParams& params, const MlpGrads& grads) {
  check_shape(grads.dW.size() == params.layers.size() && opt.mW.size() == params.layers.size(),
              "adam_step: gradient/state layer count mismatch");
  for (size_t i = 0; i < params.layers.size(); ++i) {
    check_shape(grads.dW[i].rows() == params.layers[i].W.rows() &&
                    grads.dW[i].cols() == params.layers[i].W.cols() &&
                    grads.db[i].size() == params.layers[i].b.size(),
                "adam_step: gradient shape mismatch at layer " + std::to_string(i));
    if (!grads.dW[i].allFinite() || !grads.db[i].allFinite()) {
      throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(i));
    }
  }

  opt.step += 1;
  const double b1 = opt.cfg.beta1;
  const double b2 = opt.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  for (size_t i = 0; i < params.layers.size(); ++i) {
    Layer& l = params.layers[i];
    opt.mW[i] = b1 * opt.mW[i] + (1.0 - b1) * grads.dW[i];
    opt.vW[i] = b2 * opt.vW[i] + (1.0 - b2) * grads.dW[i].cwiseAbs2();
    l.W.array() -= opt.cfg.lr * (opt.mW[i].array() / c1) /
                   ((opt.vW[i].array() / c2).sqrt() + opt.cfg.eps);

    opt.mb[i] = b1 * opt.mb[i] + (1.0 - b1) * grads.db[i];
    opt.vb[i] = b2 * opt.vb[i] + (1.0 - b2) * grads.db[i].cwiseAbs2();
    l.b.array() -= opt.cfg.lr * (opt.mb[i].array() / c1) /
                   ((opt.vb[i].array() / c2).sqrt() + opt.cfg.eps);
  }
  params.revision += 1;
}

/// Builds an MLP with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and
/// zero biases. `dims` runs input -> hidden... -> output.
inline MlpParams init_mlp(const std::vector<Eigen::Index>& dims, Activation hidden,
                          Activation head, Rng& rng) {
  check_shape(dims.size() >= 2, "init_mlp: need at least input and output dims");
  MlpParams p;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    const double limit = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    l.W = Mat(dims[i], dims[i + 1]);
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = rng.uniform(-limit, limit);
    l.b = Vec::Zero(dims[i + 1]);
    l.act = (i + 2 == dims.size()) ? head : hidden;
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace srl
