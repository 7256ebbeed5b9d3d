#pragma once

#include "surprise_rl/common.hpp"
#include "surprise_rl/observation.hpp"

#include <span>
#include <vector>

namespace srl {

/// Flat grayscale view of an observation, one entry per pixel, all in [0, 1].
using GrayObservation = Vec;

struct GrayWeights {
  // BT.601 luma by default.
  double r = 0.299;
  double g = 0.587;
  double b = 0.114;
};

/// Per pixel: (wr*R + wg*G + wb*B) / 255.
inline GrayObservation to_grayscale(const Observation& obs,
                                    const GrayWeights& w = {}) {
  GrayObservation out(obs.pixel_count());
  for (int i = 0; i < obs.pixel_count(); ++i) {
    const double r = obs.rgb[i * 3 + 0];
    const double g = obs.rgb[i * 3 + 1];
    const double b = obs.rgb[i * 3 + 2];
    out[i] = (w.r * r + w.g * g + w.b * b) / 255.0;
  }
  return out;
}

/// Raw RGB flattened and scaled to [0, 1]; no grayscale. Used by the policy
/// nets and the VAE path.
inline Vec rgb_normalized(const Observation& obs) {
  Vec out(obs.pixel_count() * 3);
  for (size_t i = 0; i < obs.rgb.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = obs.rgb[i] / 255.0;
  }
  return out;
}

/// Row-major stack: row j of the result is observation j. An empty batch
/// yields a 0 x dim matrix (pass `dim` explicitly if that case matters).
inline Mat flatten_batch(std::span<const Vec> batch, Eigen::Index dim = 0) {
  if (batch.empty()) return Mat(0, dim);
  const Eigen::Index d = batch[0].size();
  Mat out(static_cast<Eigen::Index>(batch.size()), d);
  for (size_t j = 0; j < batch.size(); ++j) {
    check_shape(batch[j].size() == d, "flatten_batch: inhomogeneous shapes");
    out.row(static_cast<Eigen::Index>(j)) = batch[j].transpose();
  }
  return out;
}

inline std::vector<Vec> unflatten_batch(const Mat& m) {
  std::vector<Vec> out(static_cast<size_t>(m.rows()));
  for (Eigen::Index j = 0; j < m.rows(); ++j) out[static_cast<size_t>(j)] = m.row(j).transpose();
  return out;
}

}  // namespace srl
