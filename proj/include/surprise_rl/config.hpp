#pragma once

#include "surprise_rl/harness.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace srl {

/// Bad key, bad value, or unreadable config file. Maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace config_detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace config_detail

/// Applies one "section.key = value" setting. Unknown keys are field-level
/// errors so typos fail loudly.
inline void apply_config_kv(ExperimentConfig& cfg, const std::string& key,
                            const std::string& value) {
  using namespace config_detail;
  if (key == "run.game") {
    if (value == "coin_seek") cfg.game = GameId::coin_seek;
    else if (value == "dodge_fight") cfg.game = GameId::dodge_fight;
    else throw ConfigError("run.game: unknown game '" + value + "'");
  } else if (key == "run.sm_mode") {
    if (value == "off") cfg.ppo.sm_mode = SmMode::off;
    else if (value == "normal") cfg.ppo.sm_mode = SmMode::normal;
    else if (value == "vae") cfg.ppo.sm_mode = SmMode::vae;
    else throw ConfigError("run.sm_mode: expected off|normal|vae, got '" + value + "'");
  } else if (key == "run.alpha") {
    cfg.ppo.alpha = parse_double(key, value);
  } else if (key == "run.train_levels") {
    cfg.train_level_count = parse_u64(key, value);
    if (cfg.train_level_count < 1) throw ConfigError("run.train_levels: must be >= 1");
  } else if (key == "run.train_seed_start") {
    cfg.train_seed_start = parse_u64(key, value);
  } else if (key == "run.total_steps") {
    cfg.total_env_steps = parse_long(key, value);
  } else if (key == "run.minibatch_size") {
    cfg.minibatch_size = static_cast<int>(parse_long(key, value));
    if (cfg.minibatch_size < 1) throw ConfigError("run.minibatch_size: must be >= 1");
  } else if (key == "run.eval_every") {
    cfg.eval_every = static_cast<int>(parse_long(key, value));
    if (cfg.eval_every < 1) throw ConfigError("run.eval_every: must be >= 1");
  } else if (key == "run.eval_episodes") {
    cfg.eval_episodes = static_cast<int>(parse_long(key, value));
  } else if (key == "run.seed") {
    cfg.master_seed = parse_u64(key, value);
  } else if (key == "run.max_episode_len") {
    cfg.max_episode_len = static_cast<int>(parse_long(key, value));
    if (cfg.max_episode_len < 1) throw ConfigError("run.max_episode_len: must be >= 1");
  } else if (key == "run.record_wall_clock") {
    cfg.record_wall_clock = parse_bool(key, value);
  } else if (key == "ppo.gamma") {
    cfg.ppo.gamma = parse_double(key, value);
    if (cfg.ppo.gamma < 0.0 || cfg.ppo.gamma > 1.0) throw ConfigError("ppo.gamma: must be in [0, 1]");
  } else if (key == "ppo.lambda") {
    cfg.ppo.lambda = parse_double(key, value);
    if (cfg.ppo.lambda < 0.0 || cfg.ppo.lambda > 1.0) throw ConfigError("ppo.lambda: must be in [0, 1]");
  } else if (key == "ppo.clip") {
    cfg.ppo.clip = parse_double(key, value);
    if (cfg.ppo.clip <= 0.0 || cfg.ppo.clip >= 1.0) throw ConfigError("ppo.clip: must be in (0, 1)");
  } else if (key == "ppo.epochs") {
    cfg.ppo.epochs = static_cast<int>(parse_long(key, value));
    if (cfg.ppo.epochs < 1) throw ConfigError("ppo.epochs: must be >= 1");
  } else if (key == "ppo.minibatch_count") {
    cfg.ppo.minibatch_count = static_cast<int>(parse_long(key, value));
    if (cfg.ppo.minibatch_count < 1) throw ConfigError("ppo.minibatch_count: must be >= 1");
  } else if (key == "ppo.entropy_coef") {
    cfg.ppo.entropy_coef = parse_double(key, value);
  } else if (key == "ppo.value_coef") {
    cfg.ppo.value_coef = parse_double(key, value);
  } else if (key == "ppo.learning_rate") {
    cfg.ppo.learning_rate = parse_double(key, value);
  } else if (key == "ppo.max_grad_norm") {
    cfg.ppo.max_grad_norm = parse_double(key, value);
  } else if (key == "ppo.sm_normalize") {
    cfg.ppo.sm_normalize = parse_bool(key, value);
  } else if (key == "density.sigma_floor") {
    cfg.sigma_floor = parse_double(key, value);
    if (cfg.sigma_floor <= 0.0) throw ConfigError("density.sigma_floor: must be > 0");
  } else if (key == "density.buffer_batches") {
    cfg.buffer_batches = static_cast<int>(parse_long(key, value));
    if (cfg.buffer_batches < 1) throw ConfigError("density.buffer_batches: must be >= 1");
  } else if (key == "vae.latent_dim") {
    cfg.latent_dim = static_cast<int>(parse_long(key, value));
    if (cfg.latent_dim < 1) throw ConfigError("vae.latent_dim: must be >= 1");
  } else if (key == "vae.beta") {
    cfg.vae_beta = parse_double(key, value);
  } else if (key == "vae.learning_rate") {
    cfg.vae_lr = parse_double(key, value);
  } else if (key == "vae.stats_denominator") {
    if (value == "b_plus_one") cfg.vae_stats_denom = StatsDenominator::b_plus_one;
    else if (value == "b") cfg.vae_stats_denom = StatsDenominator::b;
    else throw ConfigError("vae.stats_denominator: expected b_plus_one|b, got '" + value + "'");
  } else if (key == "nn.hidden_units") {
    cfg.hidden_units = static_cast<int>(parse_long(key, value));
    if (cfg.hidden_units < 1) throw ConfigError("nn.hidden_units: must be >= 1");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Canonical dump; parsing it back reproduces the config exactly.
inline std::string dump_config(const ExperimentConfig& cfg) {
  using config_detail::fmt_full;
  std::ostringstream os;
  os << "[run]\n";
  os << "game = " << game_name(cfg.game) << "\n";
  os << "sm_mode = " << sm_mode_name(cfg.ppo.sm_mode) << "\n";
  os << "alpha = " << fmt_full(cfg.ppo.alpha) << "\n";
  os << "train_levels = " << cfg.train_level_count << "\n";
  os << "train_seed_start = " << cfg.train_seed_start << "\n";
  os << "total_steps = " << cfg.total_env_steps << "\n";
  os << "minibatch_size = " << cfg.minibatch_size << "\n";
  os << "eval_every = " << cfg.eval_every << "\n";
  os << "eval_episodes = " << cfg.eval_episodes << "\n";
  os << "seed = " << cfg.master_seed << "\n";
  os << "max_episode_len = " << cfg.max_episode_len << "\n";
  os << "record_wall_clock = " << (cfg.record_wall_clock ? "true" : "false") << "\n";
  os << "\n[ppo]\n";
  os << "gamma = " << fmt_full(cfg.ppo.gamma) << "\n";
  os << "lambda = " << fmt_full(cfg.ppo.lambda) << "\n";
  os << "clip = " << fmt_full(cfg.ppo.clip) << "\n";
  os << "epochs = " << cfg.ppo.epochs << "\n";
  os << "minibatch_count = " << cfg.ppo.minibatch_count << "\n";
  os << "entropy_coef = " << fmt_full(cfg.ppo.entropy_coef) << "\n";
  os << "value_coef = " << fmt_full(cfg.ppo.value_coef) << "\n";
  os << "learning_rate = " << fmt_full(cfg.ppo.learning_rate) << "\n";
  os << "max_grad_norm = " << fmt_full(cfg.ppo.max_grad_norm) << "\n";
  os << "sm_normalize = " << (cfg.ppo.sm_normalize ? "true" : "false") << "\n";
  os << "\n[density]\n";
  os << "sigma_floor = " << fmt_full(cfg.sigma_floor) << "\n";
  os << "buffer_batches = " << cfg.buffer_batches << "\n";
  os << "\n[vae]\n";
  os << "latent_dim = " << cfg.latent_dim << "\n";
  os << "beta = " << fmt_full(cfg.vae_beta) << "\n";
  os << "learning_rate = " << fmt_full(cfg.vae_lr) << "\n";
  os << "stats_denominator = "
     << (cfg.vae_stats_denom == StatsDenominator::b_plus_one ? "b_plus_one" : "b") << "\n";
  os << "\n[nn]\n";
  os << "hidden_units = " << cfg.hidden_units << "\n";
  return os.str();
}

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace config_detail

/// Parses "key = value" lines grouped under [section] headers into
/// fully-qualified (section.key, value) pairs, in file order.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text) {
  using config_detail::trim;
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(section.empty() ? key : section + "." + key, value);
  }
  return out;
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  for (const auto& [k, v] : parse_config_text(text)) apply_config_kv(cfg, k, v);
}

struct Preset {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// The four combined-reward settings studied in the experiments, with the
/// alpha that balances SM against task reward for each game/model pair.
inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> p = {
      {"coinrun-normal",
       {{"run.game", "coin_seek"}, {"run.sm_mode", "normal"}, {"run.alpha", "1e-4"}}},
      {"bossfight-normal",
       {{"run.game", "dodge_fight"}, {"run.sm_mode", "normal"}, {"run.alpha", "1e-6"}}},
      {"coinrun-vae",
       {{"run.game", "coin_seek"}, {"run.sm_mode", "vae"}, {"run.alpha", "1e-3"}}},
      {"bossfight-vae",
       {{"run.game", "dodge_fight"}, {"run.sm_mode", "vae"}, {"run.alpha", "1e-5"}}},
  };
  return p;
}

inline const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

inline void apply_preset(ExperimentConfig& cfg, const Preset& p) {
  for (const auto& [k, v] : p.overrides) apply_config_kv(cfg, k, v);
}

}  // namespace srl
