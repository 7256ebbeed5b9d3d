#pragma once

#include "surprise_rl/checkpoint.hpp"
#include "surprise_rl/common.hpp"
#include "surprise_rl/density_normal.hpp"
#include "surprise_rl/density_vae.hpp"
#include "surprise_rl/nn_core.hpp"
#include "surprise_rl/obs_pipeline.hpp"
#include "surprise_rl/ppo_core.hpp"
#include "surprise_rl/proc_env.hpp"
#include "surprise_rl/rng.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace srl {

struct ExperimentConfig {
  GameId game = GameId::coin_seek;
  PpoConfig ppo;

  uint64_t train_level_count = 200;
  uint64_t train_seed_start = 0;
  long total_env_steps = 200000;
  int minibatch_size = 512;
  int eval_every = 10;
  int eval_episodes = 32;
  uint64_t master_seed = 1;
  int max_episode_len = 256;

  // Normal density model
  double sigma_floor = 1e-3;
  int buffer_batches = 20;  // buffer capacity = buffer_batches * minibatch_size

  // VAE density model
  int latent_dim = 8;
  double vae_beta = 1.0;
  double vae_lr = 3e-4;
  StatsDenominator vae_stats_denom = StatsDenominator::b_plus_one;

  int hidden_units = 64;

  // Off by default so repeated runs emit byte-identical metrics.
  bool record_wall_clock = false;
};

struct MetricsRecord {
  int update = 0;
  long steps = 0;
  std::optional<double> train_score;
  std::optional<double> test_score;
  double sm_mean = 0.0;
  double sm_std = 0.0;
  double pi_loss = 0.0;
  double v_loss = 0.0;
  double entropy = 0.0;
  std::optional<double> vae_loss;
  std::optional<long> wall_ms;
};

struct MetricsLog {
  std::vector<MetricsRecord> records;
  std::vector<uint64_t> test_seeds_used;  // every test seed drawn, in order
};

/// Receives records and checkpoints as the run produces them. The default
/// implementation discards everything.
struct RunSink {
  virtual ~RunSink() = default;
  virtual void on_record(const MetricsRecord&) {}
  virtual void on_checkpoint(int /*update*/, const NamedTensors&) {}
};

/// Failure wrapper naming the update where a module error surfaced.
struct RunError : std::runtime_error {
  int update;
  RunError(int u, const std::string& what)
      : std::runtime_error("update " + std::to_string(u) + ": " + what), update(u) {}
};

/// Mean raw task return of the sampling policy over `episodes` episodes,
/// cycling through `seeds` round-robin. `rng_seed` fixes the action draws.
inline double evaluate(const MlpParams& policy, GameId game,
                       std::span<const uint64_t> seeds, int episodes,
                       uint64_t rng_seed, int max_episode_len = 256) {
  if (episodes < 1) throw ContractError("evaluate: episodes must be >= 1");
  if (seeds.empty()) throw ContractError("evaluate: no seeds given");
  Rng rng(rng_seed);
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    const LevelSpec lv = generate_level(game, seeds[ep % seeds.size()]);
    auto [st, obs] = reset(lv, max_episode_len);
    while (!st.done) {
      const Vec x = rgb_normalized(obs);
      const int action = rng.categorical(action_probs(policy, x));
      auto [next_st, res] = step(st, action);
      st = next_st;
      obs = res.obs;
    }
    total += st.episode_return;
  }
  return total / episodes;
}

/// Exponential smoothing: s_1 = x_1, s_t = w s_{t-1} + (1-w) x_t.
inline std::vector<double> smooth(const std::vector<double>& series, double weight = 0.5) {
  if (weight < 0.0 || weight >= 1.0) throw ContractError("smooth: weight must be in [0, 1)");
  std::vector<double> out;
  out.reserve(series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    out.push_back(i == 0 ? series[0] : weight * out.back() + (1.0 - weight) * series[i]);
  }
  return out;
}

/// (mean train score - mean test score) over the last `window` records that
/// carry evaluation scores. Negative means test outperforms train.
inline double generalization_gap(const MetricsLog& log, int window) {
  std::vector<const MetricsRecord*> scored;
  for (const auto& r : log.records) {
    if (r.train_score && r.test_score) scored.push_back(&r);
  }
  if (static_cast<int>(scored.size()) < window || window < 1) {
    throw ContractError("generalization_gap: fewer scored records than window");
  }
  double train = 0.0, test = 0.0;
  for (size_t i = scored.size() - static_cast<size_t>(window); i < scored.size(); ++i) {
    train += *scored[i]->train_score;
    test += *scored[i]->test_score;
  }
  return (train - test) / window;
}

namespace harness_detail {

struct VaeOptimizer {
  AdamState encoder;
  AdamState decoder;
};

inline Vec standardized(const Vec& v) {
  const double mean = v.mean();
  Vec out = v.array() - mean;
  const double std_pop = std::sqrt(out.squaredNorm() / static_cast<double>(v.size()));
  return out / std::max(std_pop, 1e-8);
}

}  // namespace harness_detail

/// Runs the full training loop: rollouts under the current policy on the
/// finite train-seed set, density-model SM rewards per mode, PPO updates on
/// the combined reward, and periodic train/test evaluation. Deterministic
/// given the config.
inline MetricsLog run_experiment(const ExperimentConfig& cfg, RunSink* sink = nullptr) {
  if (cfg.total_env_steps < cfg.minibatch_size) {
    throw ContractError("run_experiment: total_env_steps < minibatch_size");
  }
  if (cfg.eval_episodes < 1) throw ContractError("run_experiment: eval_episodes must be >= 1");

  const Eigen::Index obs_dim = kGridSize * kGridSize * 3;
  const Eigen::Index gray_dim = kGridSize * kGridSize;
  const Eigen::Index B = cfg.minibatch_size;

  Rng policy_init(derive_seed(cfg.master_seed, "policy-init"));
  Rng value_init(derive_seed(cfg.master_seed, "value-init"));
  Rng vae_init(derive_seed(cfg.master_seed, "vae-init"));
  Rng level_rng(derive_seed(cfg.master_seed, "train-level-sampler"));
  Rng action_rng(derive_seed(cfg.master_seed, "rollout-actions"));
  Rng shuffle_rng(derive_seed(cfg.master_seed, "ppo-shuffle"));
  Rng vae_noise_rng(derive_seed(cfg.master_seed, "vae-noise"));

  SeedSplit split = seed_split(cfg.train_level_count,
                               derive_seed(cfg.master_seed, "test-seeds"),
                               cfg.train_seed_start);

  PpoAgent agent = make_agent(obs_dim, kNumActions, cfg.hidden_units,
                              cfg.ppo.learning_rate, policy_init, value_init);

  ObsBuffer buffer(gray_dim, static_cast<size_t>(cfg.buffer_batches) * static_cast<size_t>(B));
  VaeParams vae;
  harness_detail::VaeOptimizer vae_opt;
  if (cfg.ppo.sm_mode == SmMode::vae) {
    vae = make_vae(obs_dim, cfg.latent_dim, cfg.hidden_units, vae_init);
    AdamConfig vcfg;
    vcfg.lr = cfg.vae_lr;
    vae_opt.encoder = make_adam(vae.encoder, vcfg);
    vae_opt.decoder = make_adam(vae.decoder, vcfg);
  }

  const int n_updates = static_cast<int>(cfg.total_env_steps / cfg.minibatch_size);

  MetricsLog log;
  EnvState env;
  Observation cur_obs;
  bool need_reset = true;
  bool floor_noted = false;

  for (int update = 1; update <= n_updates; ++update) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      TrajectoryBatch batch;
      batch.obs = Mat(B, obs_dim);
      batch.gray = Mat(B, gray_dim);
      batch.actions.resize(static_cast<size_t>(B));
      batch.task_rewards = Vec(B);
      batch.sm_rewards = Vec::Zero(B);
      batch.dones = Vec(B);
      batch.logp_old = Vec(B);
      batch.values = Vec(B);

      for (Eigen::Index i = 0; i < B; ++i) {
        if (need_reset) {
          const uint64_t seed =
              split.train_seeds[level_rng.uniform_int(split.train_seeds.size())];
          auto [st, obs0] = reset(generate_level(cfg.game, seed), cfg.max_episode_len);
          env = std::move(st);
          cur_obs = std::move(obs0);
          need_reset = false;
        }
        const Vec x = rgb_normalized(cur_obs);
        const ActionSample as = sample_action(agent, x, action_rng);
        auto [next_st, res] = step(env, as.action);
        env = std::move(next_st);

        batch.obs.row(i) = x.transpose();
        batch.gray.row(i) = to_grayscale(cur_obs).transpose();
        batch.actions[static_cast<size_t>(i)] = as.action;
        batch.task_rewards[i] = res.task_reward;
        batch.dones[i] = res.done ? 1.0 : 0.0;
        batch.logp_old[i] = as.logp;
        batch.values[i] = as.value;

        cur_obs = std::move(res.obs);
        if (res.done) need_reset = true;
      }
      batch.bootstrap_value =
          need_reset ? 0.0 : forward(agent.value, rgb_normalized(cur_obs).transpose())(0, 0);

      std::optional<double> vae_loss_val;
      if (cfg.ppo.sm_mode == SmMode::normal) {
        // Push first (D_t includes the current batch), but only reward once
        // the buffer already held a full batch before this update.
        const bool warmed = buffer.size() >= static_cast<size_t>(B);
        buffer.push(batch.gray);
        if (warmed) {
          const NormalDensityParams params = fit_params(buffer, cfg.sigma_floor);
          if (params.floored > 0 && !floor_noted) {
            std::fprintf(stderr,
                         "note: sigma floor hit on %d dimension(s) at update %d\n",
                         params.floored, update);
            floor_noted = true;
          }
          batch.sm_rewards = sm_reward_batch(params, batch.gray);
        }
      } else if (cfg.ppo.sm_mode == SmMode::vae) {
        const Mat noise = vae_noise_rng.normal_matrix(B, cfg.latent_dim);
        auto [loss, grads] = vae_loss_and_grads(vae, batch.obs, noise, cfg.vae_beta);
        adam_step(vae_opt.encoder, vae.encoder, grads.encoder);
        adam_step(vae_opt.decoder, vae.decoder, grads.decoder);
        vae_loss_val = loss.total;
        const Mat z = encode_mean(vae, batch.obs);
        const LatentBatchStats stats =
            batch_latent_stats(z, cfg.sigma_floor, cfg.vae_stats_denom);
        batch.sm_rewards = vae_sm_reward_batch(stats, z);
      }

      Vec sm_used = batch.sm_rewards;
      if (cfg.ppo.sm_normalize && cfg.ppo.sm_mode != SmMode::off) {
        sm_used = harness_detail::standardized(sm_used);
      }
      const Vec combined = combine_rewards(batch.task_rewards, sm_used, cfg.ppo.alpha);
      auto [adv, ret] = gae(combined, batch.values, batch.dones, batch.bootstrap_value,
                            cfg.ppo.gamma, cfg.ppo.lambda);
      batch.advantages = std::move(adv);
      batch.returns = std::move(ret);

      const PpoStats stats = ppo_update(agent, batch, cfg.ppo, shuffle_rng);

      MetricsRecord rec;
      rec.update = update;
      rec.steps = static_cast<long>(update) * cfg.minibatch_size;
      rec.sm_mean = batch.sm_rewards.mean();
      rec.sm_std = std::sqrt((batch.sm_rewards.array() - rec.sm_mean).square().sum() /
                             static_cast<double>(B));
      rec.pi_loss = stats.policy_loss;
      rec.v_loss = stats.value_loss;
      rec.entropy = stats.entropy;
      rec.vae_loss = vae_loss_val;

      if (update % cfg.eval_every == 0) {
        rec.train_score = evaluate(agent.policy, cfg.game, split.train_seeds,
                                   cfg.eval_episodes,
                                   derive_seed(cfg.master_seed, "eval-train", update),
                                   cfg.max_episode_len);
        std::vector<uint64_t> test_seeds(static_cast<size_t>(cfg.eval_episodes));
        for (auto& s : test_seeds) s = split.test_sampler.draw();
        log.test_seeds_used.insert(log.test_seeds_used.end(), test_seeds.begin(),
                                   test_seeds.end());
        rec.test_score = evaluate(agent.policy, cfg.game, test_seeds, cfg.eval_episodes,
                                  derive_seed(cfg.master_seed, "eval-test", update),
                                  cfg.max_episode_len);
        if (sink) {
          NamedTensors t;
          pack_mlp(t, "policy", agent.policy);
          pack_mlp(t, "value", agent.value);
          sink->on_checkpoint(update, t);
        }
      }

      if (cfg.record_wall_clock) {
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      }

      log.records.push_back(rec);
      if (sink) sink->on_record(rec);
    } catch (const RunError&) {
      throw;
    } catch (const std::exception& e) {
      throw RunError(update, e.what());
    }
  }
  return log;
}

// ---- metrics CSV ----------------------------------------------------------

inline std::string metrics_csv_header() {
  return "update,steps,train_score,test_score,sm_mean,sm_std,pi_loss,v_loss,entropy,vae_loss,wall_ms";
}

namespace harness_detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

}  // namespace harness_detail

inline std::string metrics_record_csv(const MetricsRecord& r) {
  using harness_detail::fmt_double;
  using harness_detail::fmt_opt;
  std::ostringstream os;
  os << r.update << ',' << r.steps << ',' << fmt_opt(r.train_score) << ','
     << fmt_opt(r.test_score) << ',' << fmt_double(r.sm_mean) << ','
     << fmt_double(r.sm_std) << ',' << fmt_double(r.pi_loss) << ','
     << fmt_double(r.v_loss) << ',' << fmt_double(r.entropy) << ','
     << fmt_opt(r.vae_loss) << ',' << (r.wall_ms ? std::to_string(*r.wall_ms) : std::string());
  return os.str();
}

inline void write_metrics_csv(const std::string& path, const MetricsLog& log) {
  std::ofstream f(path);
  if (!f) throw IoError("write_metrics_csv: cannot open " + path);
  f << metrics_csv_header() << '\n';
  for (const auto& r : log.records) f << metrics_record_csv(r) << '\n';
  if (!f) throw IoError("write_metrics_csv: write failed " + path);
}

inline MetricsLog read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_metrics_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("read_metrics_csv: empty file " + path);
  if (line != metrics_csv_header()) throw IoError("read_metrics_csv: unexpected header in " + path);
  MetricsLog log;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(11);
    auto opt_d = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    MetricsRecord r;
    r.update = std::stoi(cells[0]);
    r.steps = std::stol(cells[1]);
    r.train_score = opt_d(cells[2]);
    r.test_score = opt_d(cells[3]);
    r.sm_mean = std::stod(cells[4]);
    r.sm_std = std::stod(cells[5]);
    r.pi_loss = std::stod(cells[6]);
    r.v_loss = std::stod(cells[7]);
    r.entropy = std::stod(cells[8]);
    r.vae_loss = opt_d(cells[9]);
    if (!cells[10].empty()) r.wall_ms = std::stol(cells[10]);
    log.records.push_back(r);
  }
  return log;
}

}  // namespace srl
