#include "surprise_rl/ppo_core.hpp"

#include "surprise_rl/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace srl;

namespace {

// Brute-force discounted-sum oracle: for lambda = 1 the advantage is the
// Monte-Carlo return minus the value estimate.
Vec mc_advantages(const Vec& rewards, const Vec& values, const Vec& dones,
                  double bootstrap, double gamma) {
  const Eigen::Index n = rewards.size();
  Vec adv(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double ret = 0, disc = 1;
    for (Eigen::Index k = t; k < n; ++k) {
      ret += disc * rewards[k];
      if (dones[k] > 0.5) {
        disc = 0;
        break;
      }
      disc *= gamma;
    }
    if (disc > 0) ret += disc * bootstrap;
    adv[t] = ret - values[t];
  }
  return adv;
}

struct RandomEpisodeBatch {
  Vec rewards, values, dones;
  double bootstrap;
};

RandomEpisodeBatch random_batch(Rng& rng, Eigen::Index n) {
  RandomEpisodeBatch b;
  b.rewards = Vec(n);
  b.values = Vec(n);
  b.dones = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.rewards[i] = rng.uniform(-1, 1);
    b.values[i] = rng.uniform(-1, 1);
    if (rng.uniform() < 0.15) b.dones[i] = 1.0;
  }
  b.bootstrap = rng.uniform(-1, 1);
  return b;
}

// One-step bandit batch: constant observation, two actions, arm 0 pays 1.
TrajectoryBatch bandit_batch(const PpoAgent& agent, Eigen::Index B, Rng& rng) {
  TrajectoryBatch batch;
  batch.obs = Mat::Ones(B, 1);
  batch.gray = Mat::Ones(B, 1);
  batch.actions.resize(static_cast<size_t>(B));
  batch.task_rewards = Vec(B);
  batch.sm_rewards = Vec::Zero(B);
  batch.dones = Vec::Ones(B);
  batch.logp_old = Vec(B);
  batch.values = Vec(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const ActionSample s = sample_action(agent, Vec::Ones(1), rng);
    batch.actions[static_cast<size_t>(i)] = s.action;
    batch.task_rewards[i] = s.action == 0 ? 1.0 : 0.0;
    batch.logp_old[i] = s.logp;
    batch.values[i] = s.value;
  }
  auto [adv, ret] = gae(batch.task_rewards, batch.values, batch.dones, 0.0, 0.99, 0.95);
  batch.advantages = adv;
  batch.returns = ret;
  return batch;
}

}  // namespace

TEST_CASE("combine_rewards basics") {
  Vec task(3), sm(3);
  task << 1, 2, 3;
  sm << -5, 0.5, 100;
  CHECK(combine_rewards(task, sm, 0.0) == task);
  const Vec c = combine_rewards(task, sm, 0.1);
  CHECK(c[0] == Catch::Approx(0.5));
  CHECK(c[2] == Catch::Approx(13.0));
  CHECK_THROWS_AS(combine_rewards(task, Vec::Zero(2), 1.0), ShapeError);
}

TEST_CASE("combine_rewards is linear in both arguments") {
  Rng rng(5);
  Vec t1(4), t2(4), s1(4), s2(4);
  for (int i = 0; i < 4; ++i) {
    t1[i] = rng.uniform(-2, 2);
    t2[i] = rng.uniform(-2, 2);
    s1[i] = rng.uniform(-2, 2);
    s2[i] = rng.uniform(-2, 2);
  }
  const double a = 0.3;
  const Vec lhs = combine_rewards(t1 + t2, s1 + s2, a);
  const Vec rhs = combine_rewards(t1, s1, a) + combine_rewards(t2, s2, a);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gae single terminal step") {
  Vec r(1), v(1), d(1);
  r << 1.0;
  v << 0.0;
  d << 1.0;
  const auto [adv, ret] = gae(r, v, d, 99.0, 0.9, 0.95);
  CHECK(adv[0] == 1.0);
  CHECK(ret[0] == 1.0);
}

TEST_CASE("lambda 0 collapses to one-step TD residuals") {
  Rng rng(11);
  const auto b = random_batch(rng, 40);
  const auto [adv, ret] = gae(b.rewards, b.values, b.dones, b.bootstrap, 0.97, 0.0);
  for (Eigen::Index t = 0; t < 40; ++t) {
    const double v_next = t + 1 < 40 ? b.values[t + 1] : b.bootstrap;
    const double delta =
        b.rewards[t] + 0.97 * v_next * (1.0 - b.dones[t]) - b.values[t];
    CHECK(adv[t] == Catch::Approx(delta).margin(1e-15));
  }
  (void)ret;
}

TEST_CASE("lambda 1, gamma 1, zero values: advantages are reward tails") {
  Vec r(3), v(3), d(3);
  r << 1, 1, 1;
  v << 0, 0, 0;
  d << 0, 0, 1;
  const auto [adv, ret] = gae(r, v, d, 0.0, 1.0, 1.0);
  CHECK(adv[0] == 3.0);
  CHECK(adv[1] == 2.0);
  CHECK(adv[2] == 1.0);
  CHECK(ret == adv);
}

TEST_CASE("lambda 1 equals Monte-Carlo returns minus values") {
  Rng rng(2023);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_int(60));
    const auto b = random_batch(rng, n);
    const double gamma = rng.uniform(0.9, 1.0);
    const auto [adv, ret] = gae(b.rewards, b.values, b.dones, b.bootstrap, gamma, 1.0);
    const Vec oracle = mc_advantages(b.rewards, b.values, b.dones, b.bootstrap, gamma);
    CHECK((adv - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ret - (adv + b.values)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("advantage normalization: zero mean, unit std, scale invariant") {
  Rng rng(8);
  Vec a(257);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform(-4, 9);
  const Vec n1 = normalize_advantages(a);
  CHECK(std::abs(n1.mean()) < 1e-10);
  const double std_pop = std::sqrt((n1.array() - n1.mean()).square().sum() / a.size());
  CHECK(std::abs(std_pop - 1.0) < 1e-6);
  // Positive rescaling of the raw rewards (zero values) rescales raw
  // advantages and must not move the normalized ones.
  const Vec n10 = normalize_advantages(10.0 * a);
  CHECK((n1 - n10).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ratio 1 surrogate step equals the vanilla policy-gradient step") {
  Rng init(404), act(405);
  PpoAgent agent = make_agent(3, 4, 8, 3e-4, init, init);
  const Eigen::Index B = 32;

  TrajectoryBatch batch;
  batch.obs = Mat(B, 3);
  Rng obs_rng(7);
  for (Eigen::Index i = 0; i < B; ++i)
    batch.obs.row(i) = obs_rng.normal_matrix(1, 3);
  batch.actions.resize(static_cast<size_t>(B));
  batch.task_rewards = Vec::Zero(B);
  batch.sm_rewards = Vec::Zero(B);
  batch.dones = Vec::Ones(B);
  batch.logp_old = Vec(B);
  batch.values = Vec::Zero(B);
  Vec adv_raw(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const ActionSample s = sample_action(agent, batch.obs.row(i).transpose(), act);
    batch.actions[static_cast<size_t>(i)] = s.action;
    batch.logp_old[i] = s.logp;
    adv_raw[i] = obs_rng.uniform(-1, 1);
  }
  batch.advantages = adv_raw;
  batch.returns = Vec::Zero(B);

  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch_count = 1;
  cfg.entropy_coef = 0.0;
  cfg.max_grad_norm = 0.0;  // compare raw gradients

  // Vanilla policy gradient of -mean(A * log pi(a)) on a copy.
  PpoAgent vanilla = agent;
  {
    const Vec adv = normalize_advantages(adv_raw);
    GradTape tape;
    const Mat probs = forward(vanilla.policy, batch.obs, &tape);
    Mat d_probs = Mat::Zero(B, 4);
    for (Eigen::Index i = 0; i < B; ++i) {
      const int a = batch.actions[static_cast<size_t>(i)];
      d_probs(i, a) = -adv[i] / probs(i, a) / static_cast<double>(B);
    }
    auto [grads, dx] = backward(vanilla.policy, tape, d_probs);
    (void)dx;
    adam_step(vanilla.policy_opt, vanilla.policy, grads);
  }

  Rng shuffle(1);
  ppo_update(agent, batch, cfg, shuffle);

  // The shuffled minibatch sums gradients in a different order, so allow
  // last-ulp float noise; any formula mismatch would show up far above this.
  for (size_t l = 0; l < agent.policy.layers.size(); ++l) {
    CHECK((agent.policy.layers[l].W - vanilla.policy.layers[l].W).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((agent.policy.layers[l].b - vanilla.policy.layers[l].b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fully clipped minibatch produces no policy movement") {
  Rng init(606), act(607);
  PpoAgent agent = make_agent(2, 3, 6, 3e-4, init, init);
  const Eigen::Index B = 16;

  TrajectoryBatch batch;
  batch.obs = Mat::Ones(B, 2);
  batch.actions.assign(static_cast<size_t>(B), 1);
  batch.task_rewards = Vec::Zero(B);
  batch.sm_rewards = Vec::Zero(B);
  batch.dones = Vec::Ones(B);
  batch.values = Vec::Zero(B);
  batch.logp_old = Vec(B);
  Vec adv(B);
  const Vec probs = action_probs(agent.policy, Vec::Ones(2));
  const double logp = std::log(probs[1]);
  for (Eigen::Index i = 0; i < B; ++i) {
    // Alternate advantage signs; push the ratio outside the clip window on
    // the losing side so min() always selects the flat clipped branch.
    const bool positive = i % 2 == 0;
    adv[i] = positive ? 1.0 : -1.0;
    batch.logp_old[i] = positive ? logp - std::log(2.0) : logp + std::log(2.0);
  }
  batch.advantages = adv;
  batch.returns = Vec::Zero(B);

  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch_count = 1;
  cfg.entropy_coef = 0.0;
  cfg.clip = 0.2;

  const MlpParams before = agent.policy;
  Rng shuffle(3);
  ppo_update(agent, batch, cfg, shuffle);
  for (size_t l = 0; l < before.layers.size(); ++l) {
    CHECK(agent.policy.layers[l].W == before.layers[l].W);
    CHECK(agent.policy.layers[l].b == before.layers[l].b);
  }
}

TEST_CASE("ppo_update is deterministic given the shuffle stream") {
  Rng init(777), act(778);
  PpoAgent a1 = make_agent(1, 2, 8, 1e-3, init, init);
  PpoAgent a2 = a1;
  Rng r1(55), r2(55);
  const TrajectoryBatch b1 = bandit_batch(a1, 64, r1);
  const TrajectoryBatch b2 = bandit_batch(a2, 64, r2);
  PpoConfig cfg;
  cfg.minibatch_count = 4;
  Rng s1(9), s2(9);
  ppo_update(a1, b1, cfg, s1);
  ppo_update(a2, b2, cfg, s2);
  for (size_t l = 0; l < a1.policy.layers.size(); ++l) {
    CHECK(a1.policy.layers[l].W == a2.policy.layers[l].W);
    CHECK(a1.value.layers[l].W == a2.value.layers[l].W);
  }
}

TEST_CASE("non-finite returns abort the update and restore parameters") {
  Rng init(31), act(32);
  PpoAgent agent = make_agent(1, 2, 4, 1e-3, init, init);
  Rng r(2);
  TrajectoryBatch batch = bandit_batch(agent, 16, r);
  batch.returns[3] = std::numeric_limits<double>::quiet_NaN();
  const PpoAgent before = agent;
  Rng shuffle(1);
  CHECK_THROWS_AS(ppo_update(agent, batch, PpoConfig{}, shuffle), NumericError);
  for (size_t l = 0; l < before.policy.layers.size(); ++l) {
    CHECK(agent.policy.layers[l].W == before.policy.layers[l].W);
    CHECK(agent.value.layers[l].W == before.value.layers[l].W);
  }
  CHECK(agent.policy_opt.step == before.policy_opt.step);
}

TEST_CASE("two-armed bandit converges to the paying arm") {
  Rng init(2468), act(1357);
  PpoAgent agent = make_agent(1, 2, 16, 1e-3, init, init);
  PpoConfig cfg;
  cfg.epochs = 3;
  cfg.minibatch_count = 4;
  cfg.gamma = 0.99;
  for (int update = 0; update < 120; ++update) {
    const TrajectoryBatch batch = bandit_batch(agent, 128, act);
    Rng shuffle(derive_seed(100, "bandit-shuffle", update));
    ppo_update(agent, batch, cfg, shuffle);
  }
  const Vec probs = action_probs(agent.policy, Vec::Ones(1));
  CHECK(probs[0] > 0.9);
}

TEST_CASE("clip_grad_norm rescales to the requested global norm") {
  MlpGrads g;
  g.dW.push_back(Mat::Constant(2, 2, 3.0));
  g.db.push_back(Vec::Constant(2, 4.0));
  // Global norm: sqrt(4*9 + 2*16) = sqrt(68).
  const double norm = std::sqrt(68.0);
  MlpGrads clipped = g;
  clip_grad_norm(clipped, 0.5);
  CHECK(clipped.dW[0](0, 0) == Catch::Approx(3.0 * 0.5 / norm).margin(1e-15));
  CHECK(clipped.db[0][1] == Catch::Approx(4.0 * 0.5 / norm).margin(1e-15));

  MlpGrads untouched = g;
  clip_grad_norm(untouched, 100.0);
  CHECK(untouched.dW[0] == g.dW[0]);
  clip_grad_norm(untouched, 0.0);  // disabled
  CHECK(untouched.dW[0] == g.dW[0]);
}
