#pragma once

#include "surprise_rl/common.hpp"
#include "surprise_rl/nn_core.hpp"
#include "surprise_rl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace srl {

enum class SmMode { off, normal, vae };

inline std::string sm_mode_name(SmMode m) {
  switch (m) {
    case SmMode::off: return "off";
    case SmMode::normal: return "normal";
    case SmMode::vae: return "vae";
  }
  return "off";
}

/// One rollout batch, arrays aligned by index.
struct TrajectoryBatch {
  Mat obs;           // B x D_raw, normalized RGB
  Mat gray;          // B x D_gray
  std::vector<int> actions;
  Vec task_rewards;
  Vec sm_rewards;    // all zero when SM is off or warming up
  Vec dones;         // 1.0 at episode ends
  Vec logp_old;
  Vec values;
  double bootstrap_value = 0.0;  // V(s_B), zero if the last step ended an episode

  Vec advantages;
  Vec returns;

  Eigen::Index size() const { return obs.rows(); }
};

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.999;
  double lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 3;
  int minibatch_count = 8;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;  // global-norm clip per minibatch step; <= 0 disables
  double alpha = 0.0;
  SmMode sm_mode = SmMode::off;
  bool sm_normalize = false;  // standardize SM rewards before scaling by alpha
};

/// r_combined = r_task + alpha * r_sm, elementwise.
inline Vec combine_rewards(const Vec& r_task, const Vec& r_sm, double alpha) {
  check_shape(r_task.size() == r_sm.size(), "combine_rewards: length mismatch");
  return r_task + alpha * r_sm;
}

/// GAE(gamma, lambda). Episode boundaries are respected through `dones`;
/// `bootstrap_value` stands in for V(s_T) after the last collected step.
inline std::pair<Vec, Vec> gae(const Vec& rewards, const Vec& values, const Vec& dones,
                               double bootstrap_value, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  check_shape(values.size() == n && dones.size() == n, "gae: length mismatch");
  Vec adv(n), ret(n);
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double not_done = 1.0 - dones[t];
    const double v_next = (t + 1 < n) ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + gamma * v_next * not_done - values[t];
    running = delta + gamma * lambda * not_done * running;
    adv[t] = running;
    ret[t] = adv[t] + values[t];
  }
  return {std::move(adv), std::move(ret)};
}

/// Policy/value pair plus optimizer state; the unit PPO updates.
struct PpoAgent {
  MlpParams policy;  // softmax head over actions
  MlpParams value;   // single linear output
  AdamState policy_opt;
  AdamState value_opt;
};

inline PpoAgent make_agent(Eigen::Index obs_dim, Eigen::Index n_actions,
                           Eigen::Index hidden, double learning_rate,
                           Rng& policy_rng, Rng& value_rng) {
  PpoAgent a;
  a.policy = init_mlp({obs_dim, hidden, hidden, n_actions}, Activation::tanh_fn,
                      Activation::softmax, policy_rng);
  a.value = init_mlp({obs_dim, hidden, hidden, 1}, Activation::tanh_fn,
                     Activation::identity, value_rng);
  // Zero output heads: the initial policy is exactly uniform and initial
  // values exactly zero, so sparse-reward exploration stays unbiased until
  // the first real return arrives.
  a.policy.layers.back().W.setZero();
  a.value.layers.back().W.setZero();
  AdamConfig opt_cfg;
  opt_cfg.lr = learning_rate;
  a.policy_opt = make_adam(a.policy, opt_cfg);
  a.value_opt = make_adam(a.value, opt_cfg);
  return a;
}

inline Vec action_probs(const MlpParams& policy, const Vec& obs) {
  return forward(policy, obs.transpose()).row(0).transpose();
}

struct ActionSample {
  int action = 0;
  double logp = 0.0;
  double value = 0.0;
};

inline ActionSample sample_action(const PpoAgent& agent, const Vec& obs, Rng& rng) {
  ActionSample s;
  const Vec probs = action_probs(agent.policy, obs);
  s.action = rng.categorical(probs);
  s.logp = std::log(probs[s.action]);
  s.value = forward(agent.value, obs.transpose())(0, 0);
  return s;
}

struct PpoStats {
  double policy_loss = 0.0;  // negative clipped surrogate
  double value_loss = 0.0;   // raw MSE
  double entropy = 0.0;
};

/// Whole-batch standardization to mean 0, population std 1.
inline Vec normalize_advantages(const Vec& adv) {
  Vec out = adv.array() - adv.mean();
  const double std_pop = std::sqrt(out.squaredNorm() / static_cast<double>(adv.size()));
  return out / std::max(std_pop, 1e-8);
}

/// Scales all gradients down so their global L2 norm is at most max_norm.
inline void clip_grad_norm(MlpGrads& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Mat& g : grads.dW) sq += g.squaredNorm();
  for (const Vec& g : grads.db) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (Mat& g : grads.dW) g *= scale;
  for (Vec& g : grads.db) g *= scale;
}

/// Clipped-surrogate PPO update over shuffled minibatches. Advantages are
/// normalized once per update (mean 0, std 1). A non-finite loss aborts the
/// whole update and restores the incoming parameters.
inline PpoStats ppo_update(PpoAgent& agent, const TrajectoryBatch& batch,
                           const PpoConfig& cfg, Rng& shuffle_rng) {
  const Eigen::Index B = batch.size();
  check_shape(B > 0, "ppo_update: empty batch");
  check_shape(batch.advantages.size() == B && batch.returns.size() == B,
              "ppo_update: advantages/returns not computed");

  const PpoAgent snapshot = agent;

  const Vec adv = normalize_advantages(batch.advantages);

  std::vector<Eigen::Index> idx(static_cast<size_t>(B));
  std::iota(idx.begin(), idx.end(), 0);

  const int mb_count = std::max(1, cfg.minibatch_count);
  PpoStats stats;
  long stat_batches = 0;

  try {
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Fisher-Yates with our deterministic stream.
      for (size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[static_cast<size_t>(shuffle_rng.uniform_int(i))]);
      }
      for (int mb = 0; mb < mb_count; ++mb) {
        const Eigen::Index lo = static_cast<Eigen::Index>(B) * mb / mb_count;
        const Eigen::Index hi = static_cast<Eigen::Index>(B) * (mb + 1) / mb_count;
        const Eigen::Index m = hi - lo;
        if (m <= 0) continue;

        Mat x(m, batch.obs.cols());
        Vec mb_adv(m), mb_ret(m), mb_logp_old(m), mb_v_old(m);
        std::vector<int> mb_act(static_cast<size_t>(m));
        for (Eigen::Index j = 0; j < m; ++j) {
          const Eigen::Index src = idx[static_cast<size_t>(lo + j)];
          x.row(j) = batch.obs.row(src);
          mb_adv[j] = adv[src];
          mb_ret[j] = batch.returns[src];
          mb_logp_old[j] = batch.logp_old[src];
          mb_v_old[j] = batch.values[src];
          mb_act[static_cast<size_t>(j)] = batch.actions[static_cast<size_t>(src)];
        }

        // Policy pass.
        GradTape pi_tape;
        const Mat probs = forward(agent.policy, x, &pi_tape);
        Mat d_probs = Mat::Zero(m, probs.cols());
        double surr_sum = 0.0, ent_sum = 0.0;
        const double inv_m = 1.0 / static_cast<double>(m);
        for (Eigen::Index j = 0; j < m; ++j) {
          const int a = mb_act[static_cast<size_t>(j)];
          const double p_a = probs(j, a);
          const double ratio = std::exp(std::log(p_a) - mb_logp_old[j]);
          const double a_j = mb_adv[j];
          const double unclipped = ratio * a_j;
          const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a_j;
          surr_sum += std::min(unclipped, clipped);
          if (unclipped <= clipped) {
            d_probs(j, a) -= a_j * ratio / p_a * inv_m;  // maximize -> negative loss grad
          }
          for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double p = probs(j, k);
            ent_sum -= p * std::log(p);
            d_probs(j, k) += cfg.entropy_coef * (std::log(p) + 1.0) * inv_m;
          }
        }
        const double surr = surr_sum * inv_m;
        const double ent = ent_sum * inv_m;

        // Value pass, with the clipped value objective: the prediction may
        // not move further than the clip window from its rollout estimate.
        GradTape v_tape;
        const Mat v = forward(agent.value, x, &v_tape);
        Mat d_v = Mat::Zero(m, 1);
        double v_loss_sum = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
          const double err = v(j, 0) - mb_ret[j];
          const double v_clip =
              mb_v_old[j] + std::clamp(v(j, 0) - mb_v_old[j], -cfg.clip, cfg.clip);
          const double err_clip = v_clip - mb_ret[j];
          if (err * err >= err_clip * err_clip) {
            v_loss_sum += err * err;
            d_v(j, 0) = 2.0 * cfg.value_coef * inv_m * err;
          } else {
            v_loss_sum += err_clip * err_clip;
          }
        }
        const double v_mse = v_loss_sum * inv_m;

        const double loss = -surr - cfg.entropy_coef * ent + cfg.value_coef * v_mse;
        if (!std::isfinite(loss)) throw NumericError("ppo_update: non-finite loss");

        auto [pi_grads, d_x_pi] = backward(agent.policy, pi_tape, d_probs);
        clip_grad_norm(pi_grads, cfg.max_grad_norm);
        adam_step(agent.policy_opt, agent.policy, pi_grads);
        auto [v_grads, d_x_v] = backward(agent.value, v_tape, d_v);
        clip_grad_norm(v_grads, cfg.max_grad_norm);
        adam_step(agent.value_opt, agent.value, v_grads);
        (void)d_x_pi;
        (void)d_x_v;

        stats.policy_loss += -surr;
        stats.value_loss += v_mse;
        stats.entropy += ent;
        stat_batches += 1;
      }
    }
  } catch (...) {
    agent = snapshot;
    throw;
  }

  if (stat_batches > 0) {
    stats.policy_loss /= static_cast<double>(stat_batches);
    stats.value_loss /= static_cast<double>(stat_batches);
    stats.entropy /= static_cast<double>(stat_batches);
  }
  return stats;
}

}  // namespace srl
