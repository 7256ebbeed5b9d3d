#pragma once

#include "surprise_rl/common.hpp"
#include "surprise_rl/nn_core.hpp"

#include <cmath>
#include <numbers>

namespace srl {

/// Encoder maps an observation to (mean, log_var) of q(z|s); decoder maps a
/// latent back to observation space.
struct VaeParams {
  MlpParams encoder;  // obs_dim -> 2 * latent_dim
  MlpParams decoder;  // latent_dim -> obs_dim
  Eigen::Index latent_dim = 8;
};

inline VaeParams make_vae(Eigen::Index obs_dim, Eigen::Index latent_dim,
                          Eigen::Index hidden, Rng& rng) {
  VaeParams v;
  v.latent_dim = latent_dim;
  v.encoder = init_mlp({obs_dim, hidden, hidden, 2 * latent_dim},
                       Activation::tanh_fn, Activation::identity, rng);
  v.decoder = init_mlp({latent_dim, hidden, hidden, obs_dim},
                       Activation::tanh_fn, Activation::identity, rng);
  return v;
}

struct VaeGrads {
  MlpGrads encoder;
  MlpGrads decoder;
};

struct VaeLoss {
  double total = 0;
  double recon = 0;
  double kl = 0;
};

/// ELBO-style loss: squared reconstruction error plus beta * KL(q || N(0,I)),
/// both averaged over the batch. Latents are drawn with the caller-supplied
/// noise via the reparameterization z = mean + exp(log_var/2) .* noise.
inline std::pair<VaeLoss, VaeGrads> vae_loss_and_grads(const VaeParams& params,
                                                       const Mat& batch,
                                                       const Mat& noise,
                                                       double beta = 1.0) {
  const Eigen::Index B = batch.rows();
  const Eigen::Index L = params.latent_dim;
  check_shape(B >= 1, "vae_loss_and_grads: empty batch");
  check_shape(batch.cols() == params.encoder.in_dim(), "vae_loss_and_grads: obs dim mismatch");
  check_shape(noise.rows() == B && noise.cols() == L, "vae_loss_and_grads: noise shape mismatch");

  GradTape enc_tape;
  const Mat enc_out = forward(params.encoder, batch, &enc_tape);
  const Mat mean = enc_out.leftCols(L);
  const Mat log_var = enc_out.rightCols(L);

  const Mat z = gaussian_sample(mean, log_var, noise);

  GradTape dec_tape;
  const Mat recon = forward(params.decoder, z, &dec_tape);

  const double inv_b = 1.0 / static_cast<double>(B);
  VaeLoss loss;
  loss.recon = (recon - batch).squaredNorm() * inv_b;
  loss.kl = -0.5 * inv_b *
            (1.0 + log_var.array() - mean.array().square() - log_var.array().exp()).sum();
  loss.total = loss.recon + beta * loss.kl;
  if (!std::isfinite(loss.total)) throw NumericError("vae_loss_and_grads: non-finite loss");

  VaeGrads grads;

  // Reconstruction term through the decoder.
  const Mat d_recon = 2.0 * inv_b * (recon - batch);
  auto [dec_grads, d_z] = backward(params.decoder, dec_tape, d_recon);
  grads.decoder = std::move(dec_grads);

  // Reparameterization: z = mean + exp(log_var/2) .* noise.
  const Mat std_dev = (log_var.array() / 2.0).exp();
  Mat d_mean = d_z;
  Mat d_log_var = (d_z.array() * noise.array() * std_dev.array() * 0.5).matrix();

  // KL term acts on the encoder outputs directly.
  d_mean.array() += beta * inv_b * mean.array();
  d_log_var.array() += beta * inv_b * 0.5 * (log_var.array().exp() - 1.0);

  Mat d_enc(B, 2 * L);
  d_enc.leftCols(L) = d_mean;
  d_enc.rightCols(L) = d_log_var;
  auto [enc_grads, d_x] = backward(params.encoder, enc_tape, d_enc);
  grads.encoder = std::move(enc_grads);
  (void)d_x;

  return {loss, std::move(grads)};
}

/// Row j is E[q(z|s_j)] — the encoder posterior mean, no sampling.
inline Mat encode_mean(const VaeParams& params, const Mat& batch) {
  const Mat enc_out = forward(params.encoder, batch);
  return enc_out.leftCols(params.latent_dim);
}

/// Diagonal Gaussian over one batch of latent codes.
struct LatentBatchStats {
  Vec mu;
  Vec sigma_sq;  // diagonal variances, floored
  Eigen::Index batch_size = 0;
};

enum class StatsDenominator { b_plus_one, b };

/// mu = sum_j z_j / (B+1), sigma^2 = sum_j (mu - z_j)^2 / (B+1). The B+1
/// denominator acts as a zero pseudo-observation prior; the plain-B variant
/// is available behind the switch.
inline LatentBatchStats batch_latent_stats(const Mat& latents, double sigma_floor = 1e-3,
                                           StatsDenominator denom = StatsDenominator::b_plus_one) {
  const Eigen::Index B = latents.rows();
  if (B < 1) throw InsufficientDataError("batch_latent_stats: empty latent batch");
  const double den = (denom == StatsDenominator::b_plus_one)
                         ? static_cast<double>(B + 1)
                         : static_cast<double>(B);
  LatentBatchStats s;
  s.batch_size = B;
  s.mu = latents.colwise().sum().transpose() / den;
  Vec acc = Vec::Zero(latents.cols());
  for (Eigen::Index r = 0; r < B; ++r) {
    acc += (s.mu - latents.row(r).transpose()).cwiseAbs2();
  }
  s.sigma_sq = acc / den;
  const double floor_sq = sigma_floor * sigma_floor;
  s.sigma_sq = s.sigma_sq.cwiseMax(floor_sq);
  return s;
}

/// Full diagonal-Gaussian log density:
/// -1/2 sum_i [ log(2 pi sigma_i^2) + (z_i - mu_i)^2 / sigma_i^2 ].
inline double vae_sm_reward(const LatentBatchStats& stats, const Vec& z) {
  check_shape(z.size() == stats.mu.size(), "vae_sm_reward: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double d = z[i] - stats.mu[i];
    acc += std::log(2.0 * std::numbers::pi * stats.sigma_sq[i]) + d * d / stats.sigma_sq[i];
  }
  return -0.5 * acc;
}

inline Vec vae_sm_reward_batch(const LatentBatchStats& stats, const Mat& latents) {
  Vec out(latents.rows());
  for (Eigen::Index r = 0; r < latents.rows(); ++r) {
    out[r] = vae_sm_reward(stats, latents.row(r).transpose());
  }
  return out;
}

}  // namespace srl
