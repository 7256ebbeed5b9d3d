// Command-line front end: train / eval / compare over the surprise-minimizing
// PPO stack. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include "surprise_rl/checkpoint.hpp"
#include "surprise_rl/config.hpp"
#include "surprise_rl/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace srl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string default_out_root() {
  if (const char* env = std::getenv("SURPRISE_RL_OUT")) return env;
  return "runs";
}

/// Streams records into metrics.csv and checkpoints into checkpoints/ as the
/// run progresses.
class DirectorySink : public RunSink {
 public:
  explicit DirectorySink(const fs::path& run_dir) : run_dir_(run_dir) {
    fs::create_directories(run_dir_ / "checkpoints");
    csv_.open(run_dir_ / "metrics.csv");
    if (!csv_) throw IoError("cannot open metrics.csv under " + run_dir_.string());
    csv_ << metrics_csv_header() << '\n';
    csv_.flush();
  }

  void on_record(const MetricsRecord& rec) override {
    csv_ << metrics_record_csv(rec) << '\n';
    csv_.flush();
    if (rec.train_score && rec.test_score) {
      std::printf("update %5d  steps %8ld  train %6.3f  test %6.3f\n", rec.update,
                  rec.steps, *rec.train_score, *rec.test_score);
      std::fflush(stdout);
    }
  }

  void on_checkpoint(int update, const NamedTensors& tensors) override {
    char name[64];
    std::snprintf(name, sizeof(name), "update_%06d.ckpt", update);
    save_tensors((run_dir_ / "checkpoints" / name).string(), tensors);
  }

 private:
  fs::path run_dir_;
  std::ofstream csv_;
};

struct TrainArgs {
  std::string preset;
  std::string config_file;
  std::vector<std::string> sets;
  std::string out_root = default_out_root();
  std::string name;
  std::optional<uint64_t> seed;
  std::optional<long> steps;
  std::string sm_mode;
  std::optional<double> alpha;
  std::string game;
};

int run_train(const TrainArgs& args) {
  ExperimentConfig cfg;
  std::string base_name = "run";

  if (!args.preset.empty()) {
    const Preset* p = find_preset(args.preset);
    if (!p) {
      std::cerr << "unknown preset '" << args.preset << "' (have:";
      for (const auto& q : presets()) std::cerr << ' ' << q.name;
      std::cerr << ")\n";
      return kExitUsage;
    }
    apply_preset(cfg, *p);
    base_name = p->name;
  }
  if (!args.config_file.empty()) apply_config_file(cfg, args.config_file);
  for (const std::string& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_config_kv(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!args.game.empty()) apply_config_kv(cfg, "run.game", args.game);
  if (!args.sm_mode.empty()) apply_config_kv(cfg, "run.sm_mode", args.sm_mode);
  if (args.alpha) cfg.ppo.alpha = *args.alpha;
  if (args.seed) cfg.master_seed = *args.seed;
  if (args.steps) cfg.total_env_steps = *args.steps;

  std::string run_name = args.name;
  if (run_name.empty()) run_name = base_name + "-s" + std::to_string(cfg.master_seed);

  const fs::path run_dir = fs::path(args.out_root) / run_name;
  fs::create_directories(run_dir);
  {
    std::ofstream dump(run_dir / "config.dump");
    dump << dump_config(cfg);
  }

  DirectorySink sink(run_dir);
  const MetricsLog log = run_experiment(cfg, &sink);
  std::printf("done: %zu updates, output in %s\n", log.records.size(),
              run_dir.string().c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string game = "coin_seek";
  std::string split = "test";
  int episodes = 32;
  uint64_t train_levels = 200;
  uint64_t seed = 1;
  int max_episode_len = 256;
};

int run_eval(const EvalArgs& args) {
  GameId game;
  if (args.game == "coin_seek") game = GameId::coin_seek;
  else if (args.game == "dodge_fight") game = GameId::dodge_fight;
  else {
    std::cerr << "unknown game '" << args.game << "'\n";
    return kExitUsage;
  }
  if (args.split != "train" && args.split != "test") {
    std::cerr << "split must be train or test\n";
    return kExitUsage;
  }
  if (args.episodes < 1 || args.train_levels < 1) {
    std::cerr << "episodes and train-levels must be >= 1\n";
    return kExitUsage;
  }

  MlpParams policy;
  try {
    const NamedTensors tensors = load_tensors(args.checkpoint);
    policy = unpack_mlp(tensors, "policy", Activation::tanh_fn, Activation::softmax);
  } catch (const IoError& e) {
    std::cerr << "bad checkpoint: " << e.what() << "\n";
    return kExitUsage;
  }

  SeedSplit split = seed_split(args.train_levels, derive_seed(args.seed, "cli-eval-seeds"));
  std::vector<uint64_t> seeds;
  if (args.split == "train") {
    seeds = split.train_seeds;
  } else {
    seeds.resize(static_cast<size_t>(args.episodes));
    for (auto& s : seeds) s = split.test_sampler.draw();
  }

  const double score = evaluate(policy, game, seeds, args.episodes,
                                derive_seed(args.seed, "cli-eval-actions"),
                                args.max_episode_len);
  std::printf("%.10g\n", score);
  return kExitOk;
}

struct CompareArgs {
  std::vector<std::string> run_dirs;
  int window = 5;
  std::string out_csv = "compare.csv";
};

int run_compare(const CompareArgs& args) {
  if (args.run_dirs.size() < 2) {
    std::cerr << "compare needs at least two run directories\n";
    return kExitUsage;
  }
  if (args.window < 1) {
    std::cerr << "window must be >= 1\n";
    return kExitUsage;
  }

  struct Row {
    std::string name;
    std::vector<int> updates;
    std::vector<long> steps;
    std::vector<double> train, test, train_sm, test_sm;
    double train_mean = 0, test_mean = 0, gap = 0;
  };
  std::vector<Row> rows;

  for (const std::string& dir : args.run_dirs) {
    const fs::path csv_path = fs::path(dir) / "metrics.csv";
    MetricsLog log;
    try {
      log = read_metrics_csv(csv_path.string());
    } catch (const IoError& e) {
      std::cerr << e.what() << "\n";
      return kExitUsage;
    }
    Row row;
    row.name = fs::path(dir).filename().string();
    if (row.name.empty()) row.name = dir;
    for (const auto& r : log.records) {
      if (r.train_score && r.test_score) {
        row.updates.push_back(r.update);
        row.steps.push_back(r.steps);
        row.train.push_back(*r.train_score);
        row.test.push_back(*r.test_score);
      }
    }
    if (static_cast<int>(row.train.size()) < args.window) {
      std::cerr << dir << ": only " << row.train.size()
                << " evaluation records, need >= " << args.window << "\n";
      return kExitUsage;
    }
    row.train_sm = smooth(row.train, 0.5);
    row.test_sm = smooth(row.test, 0.5);
    const size_t lo = row.train_sm.size() - static_cast<size_t>(args.window);
    for (size_t i = lo; i < row.train_sm.size(); ++i) {
      row.train_mean += row.train_sm[i];
      row.test_mean += row.test_sm[i];
    }
    row.train_mean /= args.window;
    row.test_mean /= args.window;
    row.gap = row.train_mean - row.test_mean;
    rows.push_back(std::move(row));
  }

  std::printf("%-28s %12s %12s %12s\n", "run", "train", "test", "gap");
  for (const auto& row : rows) {
    std::printf("%-28s %12.6g %12.6g %12.6g\n", row.name.c_str(), row.train_mean,
                row.test_mean, row.gap);
  }

  std::ofstream out(args.out_csv);
  if (!out) {
    std::cerr << "cannot write " << args.out_csv << "\n";
    return kExitRuntime;
  }
  out << "run,update,steps,series,value\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.train.size(); ++i) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s,%d,%ld,train_score,%.10g\n", row.name.c_str(),
                    row.updates[i], row.steps[i], row.train[i]);
      out << buf;
      std::snprintf(buf, sizeof(buf), "%s,%d,%ld,test_score,%.10g\n", row.name.c_str(),
                    row.updates[i], row.steps[i], row.test[i]);
      out << buf;
      std::snprintf(buf, sizeof(buf), "%s,%d,%ld,train_score_smooth,%.10g\n",
                    row.name.c_str(), row.updates[i], row.steps[i], row.train_sm[i]);
      out << buf;
      std::snprintf(buf, sizeof(buf), "%s,%d,%ld,test_score_smooth,%.10g\n",
                    row.name.c_str(), row.updates[i], row.steps[i], row.test_sm[i]);
      out << buf;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surprise-minimizing PPO on procedurally generated grid games"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("--preset", train_args.preset, "Named preset configuration");
  train->add_option("--config", train_args.config_file, "Config file (key = value sections)");
  train->add_option("--set", train_args.sets, "Override: section.key=value (repeatable)");
  train->add_option("--out", train_args.out_root, "Output root (default $SURPRISE_RL_OUT or ./runs)");
  train->add_option("--name", train_args.name, "Run directory name");
  train->add_option("--seed", train_args.seed, "Master seed");
  train->add_option("--steps", train_args.steps, "Total environment steps");
  train->add_option("--sm-mode", train_args.sm_mode, "off|normal|vae")
      ->check(CLI::IsMember({"off", "normal", "vae"}));
  train->add_option("--alpha", train_args.alpha, "SM reward scale");
  train->add_option("--game", train_args.game, "coin_seek|dodge_fight")
      ->check(CLI::IsMember({"coin_seek", "dodge_fight"}));

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--game", eval_args.game, "coin_seek|dodge_fight")
      ->check(CLI::IsMember({"coin_seek", "dodge_fight"}));
  eval->add_option("--split", eval_args.split, "train|test")
      ->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--episodes", eval_args.episodes, "Episodes to run");
  eval->add_option("--train-levels", eval_args.train_levels, "Train seed count defining the split");
  eval->add_option("--seed", eval_args.seed, "Evaluation seed");
  eval->add_option("--max-episode-len", eval_args.max_episode_len, "Episode step cap");

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand("compare", "Compare finished runs");
  compare->add_option("run_dirs", compare_args.run_dirs, "Run directories")->expected(-1);
  compare->add_option("--window", compare_args.window, "Trailing eval records to average");
  compare->add_option("--out", compare_args.out_csv, "Combined long-format CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message / help
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (compare->parsed()) return run_compare(compare_args);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
