#pragma once

#include "surprise_rl/common.hpp"
#include "surprise_rl/observation.hpp"
#include "surprise_rl/rng.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

namespace srl {

enum class GameId { coin_seek, dodge_fight };

inline std::string game_name(GameId g) {
  return g == GameId::coin_seek ? "coin_seek" : "dodge_fight";
}

enum class Cell : uint8_t { empty, wall, gap, hazard, coin, spawn };

constexpr int kGridSize = 16;
constexpr int kNumActions = 5;

// coin_seek actions: 0 left, 1 right, 2 jump(up), 3 down, 4 noop.
// dodge_fight actions: 0 left, 1 right, 2 up, 3 down, 4 fire.

/// Pure function of (game_id, seed). For coin_seek the layout grid is
/// populated; for dodge_fight the arena scalars are.
struct LevelSpec {
  GameId game = GameId::coin_seek;
  uint64_t seed = 0;
  int width = kGridSize;
  int height = kGridSize;
  int palette_id = 0;

  // coin_seek
  std::vector<Cell> grid;
  int spawn_x = 0, spawn_y = 0;
  int coin_x = 0, coin_y = 0;

  // dodge_fight
  int boss_x = 0, boss_y = 0;  // top-left of the 2x2 boss block (patrol base)
  int boss_health = 0;
  int laser_pattern = 0;
  int texture_id = 0;

  Cell at(int x, int y) const { return grid[y * width + x]; }
  Cell& at(int x, int y) { return grid[y * width + x]; }

  bool operator==(const LevelSpec&) const = default;

  /// Canonical textual dump: one header line, then one line per grid row
  /// with single-char tags. Used in golden tests.
  std::string dump() const;
};

namespace env_detail {

constexpr int kDodgeBossRow = 2;
constexpr int kDodgeAgentMinRow = 6;
constexpr int kDodgeSpawnX = 8;
constexpr int kDodgeSpawnY = 13;

// Background palettes. coin_seek uses light "sky" tones, dodge_fight dark
// "space" tones. None of these collide with entity colors.
inline const std::array<std::array<uint8_t, 3>, 8>& coin_palettes() {
  static const std::array<std::array<uint8_t, 3>, 8> p = {{{140, 180, 235},
                                                           {150, 200, 170},
                                                           {210, 180, 150},
                                                           {180, 160, 210},
                                                           {160, 210, 220},
                                                           {200, 200, 140},
                                                           {170, 170, 190},
                                                           {220, 170, 170}}};
  return p;
}

inline const std::array<std::array<uint8_t, 3>, 8>& dodge_palettes() {
  static const std::array<std::array<uint8_t, 3>, 8> p = {{{25, 25, 40},
                                                           {35, 25, 35},
                                                           {20, 35, 35},
                                                           {40, 30, 20},
                                                           {25, 40, 25},
                                                           {30, 30, 50},
                                                           {45, 25, 25},
                                                           {20, 20, 20}}};
  return p;
}

inline bool lethal(Cell c) { return c == Cell::gap || c == Cell::hazard; }
inline bool passable(Cell c) { return c != Cell::wall && !lethal(c); }

/// BFS from spawn over passable cells.
inline bool coin_reachable(const LevelSpec& lv) {
  std::vector<uint8_t> seen(lv.grid.size(), 0);
  std::queue<std::pair<int, int>> q;
  q.emplace(lv.spawn_x, lv.spawn_y);
  seen[lv.spawn_y * lv.width + lv.spawn_x] = 1;
  const int dx[4] = {-1, 1, 0, 0};
  const int dy[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    if (x == lv.coin_x && y == lv.coin_y) return true;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= lv.width || ny >= lv.height) continue;
      if (seen[ny * lv.width + nx]) continue;
      const Cell c = lv.at(nx, ny);
      if (!passable(c) && !(nx == lv.coin_x && ny == lv.coin_y)) continue;
      seen[ny * lv.width + nx] = 1;
      q.emplace(nx, ny);
    }
  }
  return false;
}

inline bool try_generate_coin_seek(uint64_t seed, uint64_t attempt, LevelSpec& lv) {
  Rng rng(derive_seed(seed, "coin_seek level", attempt));
  lv = LevelSpec{};
  lv.game = GameId::coin_seek;
  lv.seed = seed;
  lv.grid.assign(kGridSize * kGridSize, Cell::empty);
  lv.palette_id = static_cast<int>(rng.uniform_int(8));

  for (int x = 0; x < lv.width; ++x) {
    lv.at(x, 0) = Cell::wall;
    lv.at(x, lv.height - 1) = Cell::wall;
  }
  for (int y = 0; y < lv.height; ++y) {
    lv.at(0, y) = Cell::wall;
    lv.at(lv.width - 1, y) = Cell::wall;
  }
  for (int y = 1; y < lv.height - 1; ++y) {
    for (int x = 1; x < lv.width - 1; ++x) {
      const double u = rng.uniform();
      if (u < 0.12) {
        lv.at(x, y) = Cell::wall;
      } else if (u < 0.135) {
        lv.at(x, y) = Cell::hazard;
      } else if (u < 0.145) {
        lv.at(x, y) = Cell::gap;
      }
    }
  }

  // Spawn in the left third, coin in the right third, both on empty cells.
  std::vector<std::pair<int, int>> left, right;
  for (int y = 1; y < lv.height - 1; ++y) {
    for (int x = 1; x < lv.width - 1; ++x) {
      if (lv.at(x, y) != Cell::empty) continue;
      if (x <= 5) left.emplace_back(x, y);
      if (x >= lv.width - 6) right.emplace_back(x, y);
    }
  }
  if (left.empty() || right.empty()) return false;
  const auto [sx, sy] = left[rng.uniform_int(left.size())];
  const auto [cx, cy] = right[rng.uniform_int(right.size())];
  lv.spawn_x = sx;
  lv.spawn_y = sy;
  lv.coin_x = cx;
  lv.coin_y = cy;
  lv.at(sx, sy) = Cell::spawn;
  lv.at(cx, cy) = Cell::coin;

  return coin_reachable(lv);
}

inline LevelSpec generate_dodge_fight(uint64_t seed) {
  Rng rng(derive_seed(seed, "dodge_fight level"));
  LevelSpec lv;
  lv.game = GameId::dodge_fight;
  lv.seed = seed;
  lv.grid.clear();
  lv.palette_id = static_cast<int>(rng.uniform_int(8));
  lv.boss_x = 3 + static_cast<int>(rng.uniform_int(10));  // patrol base in [3, 12]
  lv.boss_y = kDodgeBossRow;
  lv.boss_health = 6 + static_cast<int>(rng.uniform_int(7));  // [6, 12]
  lv.laser_pattern = static_cast<int>(rng.uniform_int(4));
  lv.texture_id = static_cast<int>(rng.uniform_int(8));
  lv.spawn_x = kDodgeSpawnX;
  lv.spawn_y = kDodgeSpawnY;
  return lv;
}

/// Horizontal patrol offset, triangle wave with seed-derived phase.
inline int boss_patrol_x(const LevelSpec& lv, int tick) {
  static const int tri[12] = {0, 1, 2, 3, 2, 1, 0, -1, -2, -3, -2, -1};
  const int phase = static_cast<int>(splitmix64(lv.seed ^ 0x51ab0cull) % 12);
  const int x = lv.boss_x + tri[(tick + phase) % 12];
  return std::clamp(x, 1, lv.width - 3);
}

enum class LaserPhase { none, telegraph, active };

struct LaserColumn {
  int x = -1;
  LaserPhase phase = LaserPhase::none;
};

/// Laser schedule: pure function of (level, tick). Every period the pattern
/// picks one or two columns; a telegraph window precedes the active window.
inline std::array<LaserColumn, 2> laser_columns(const LevelSpec& lv, int tick) {
  std::array<LaserColumn, 2> out;
  if (tick < 0) return out;
  const int period = 10 + 2 * static_cast<int>(splitmix64(lv.seed ^ 0xfacadeull) % 4);
  const int phase_t = tick % period;
  LaserPhase phase = LaserPhase::none;
  if (phase_t >= period - 2) {
    phase = LaserPhase::active;
  } else if (phase_t >= period - 5) {
    phase = LaserPhase::telegraph;
  } else {
    return out;
  }
  const int k = tick / period;
  const int span = lv.width - 2;  // columns 1 .. 14
  int col = 1;
  switch (lv.laser_pattern) {
    case 0:
      col = 1 + (3 * k) % span;
      break;
    case 1:
      col = lv.width - 2 - (3 * k) % span;
      break;
    case 2:
      col = 1 + static_cast<int>(splitmix64(lv.seed ^ (0xbeefull + 0x9e3779b9ull * static_cast<uint64_t>(k))) % span);
      break;
    default:
      col = 1 + (5 * k) % span;
      break;
  }
  out[0] = {col, phase};
  if (lv.laser_pattern == 3) {
    out[1] = {lv.width - 1 - col, phase};
  }
  return out;
}

inline int laser_top_row(const LevelSpec& lv) { return lv.boss_y + 2; }

}  // namespace env_detail

struct EnvState {
  std::shared_ptr<const LevelSpec> level;
  int agent_x = 0, agent_y = 0;
  int tick = 0;
  double episode_return = 0.0;
  bool done = false;
  int max_episode_len = 256;

  // dodge_fight entity state; laser and boss positions are schedule-derived.
  int boss_hp = 0;
  bool bullet_active = false;
  int bullet_x = 0, bullet_y = 0;
};

struct StepResult {
  Observation obs;
  double task_reward = 0.0;
  bool done = false;
};

inline LevelSpec generate_level(GameId game, uint64_t seed) {
  if (game == GameId::dodge_fight) return env_detail::generate_dodge_fight(seed);
  LevelSpec lv;
  for (uint64_t attempt = 0; attempt < 100; ++attempt) {
    if (env_detail::try_generate_coin_seek(seed, attempt, lv)) return lv;
  }
  throw NumericError("generate_level: no solvable coin_seek layout in 100 attempts (generator defect)");
}

inline Observation render(const EnvState& st) {
  const LevelSpec& lv = *st.level;
  Observation obs(lv.height, lv.width);
  if (lv.game == GameId::coin_seek) {
    // Egocentric view: the agent sits at the view center and the world
    // scrolls beneath it, like a camera locked to the player.
    const auto& bg = env_detail::coin_palettes()[lv.palette_id % 8];
    const int cy = lv.height / 2, cx = lv.width / 2;
    for (int vy = 0; vy < lv.height; ++vy) {
      for (int vx = 0; vx < lv.width; ++vx) {
        const int wy = st.agent_y + vy - cy;
        const int wx = st.agent_x + vx - cx;
        uint8_t r = bg[0], g = bg[1], b = bg[2];
        if (wx >= 0 && wy >= 0 && wx < lv.width && wy < lv.height) {
          switch (lv.at(wx, wy)) {
            case Cell::wall: r = 110; g = 110; b = 110; break;
            case Cell::gap: r = 25; g = 25; b = 70; break;
            case Cell::hazard: r = 205; g = 40; b = 40; break;
            case Cell::coin: r = 235; g = 200; b = 40; break;
            default: break;  // empty / spawn keep the background color
          }
        }
        obs.set_pixel(vy, vx, r, g, b);
      }
    }
    obs.set_pixel(cy, cx, 255, 255, 255);
    return obs;
  }

  // dodge_fight: fixed camera, static textured background.
  const auto& bg = env_detail::dodge_palettes()[lv.palette_id % 8];
  for (int y = 0; y < lv.height; ++y) {
    for (int x = 0; x < lv.width; ++x) {
      uint8_t r = bg[0], g = bg[1], b = bg[2];
      if ((x * 7 + y * 13 + lv.texture_id * 31) % 11 == 0) {
        r += 30; g += 30; b += 30;  // star speckle
      }
      obs.set_pixel(y, x, r, g, b);
    }
  }
  const auto lasers = env_detail::laser_columns(lv, st.tick);
  for (const auto& lc : lasers) {
    if (lc.phase == env_detail::LaserPhase::none) continue;
    for (int y = env_detail::laser_top_row(lv); y <= lv.height - 2; ++y) {
      if (lc.phase == env_detail::LaserPhase::active) {
        obs.set_pixel(y, lc.x, 255, 90, 60);
      } else {
        obs.set_pixel(y, lc.x, 95, 60, 50);
      }
    }
  }
  const int bx = env_detail::boss_patrol_x(lv, st.tick);
  if (st.boss_hp > 0) {
    for (int y = lv.boss_y; y < lv.boss_y + 2; ++y)
      for (int x = bx; x < bx + 2; ++x) obs.set_pixel(y, x, 185, 60, 200);
  }
  if (st.bullet_active) obs.set_pixel(st.bullet_y, st.bullet_x, 80, 220, 255);
  obs.set_pixel(st.agent_y, st.agent_x, 255, 255, 255);
  return obs;
}

inline std::pair<EnvState, Observation> reset(const LevelSpec& level,
                                              int max_episode_len = 256) {
  EnvState st;
  st.level = std::make_shared<LevelSpec>(level);
  st.agent_x = level.spawn_x;
  st.agent_y = level.spawn_y;
  st.max_episode_len = max_episode_len;
  if (level.game == GameId::dodge_fight) st.boss_hp = level.boss_health;
  return {st, render(st)};
}

inline std::pair<EnvState, StepResult> step(const EnvState& state, int action) {
  if (state.done) throw ContractError("step: episode already finished");
  if (action < 0 || action >= kNumActions) throw ContractError("step: action out of range");

  const LevelSpec& lv = *state.level;
  EnvState st = state;
  st.tick += 1;
  double reward = 0.0;

  if (lv.game == GameId::coin_seek) {
    int nx = st.agent_x, ny = st.agent_y;
    switch (action) {
      case 0: nx -= 1; break;
      case 1: nx += 1; break;
      case 2: ny -= 1; break;  // jump
      case 3: ny += 1; break;
      default: break;  // noop
    }
    const Cell target = lv.at(nx, ny);
    if (target != Cell::wall) {
      st.agent_x = nx;
      st.agent_y = ny;
      if (env_detail::lethal(target)) {
        st.done = true;
      } else if (target == Cell::coin) {
        reward = 10.0;
        st.done = true;
      }
    }
  } else {
    // Agent acts first.
    if (action == 4) {
      if (!st.bullet_active && st.boss_hp > 0) {
        st.bullet_active = true;
        st.bullet_x = st.agent_x;
        st.bullet_y = st.agent_y - 1;
      }
    } else {
      int nx = st.agent_x, ny = st.agent_y;
      switch (action) {
        case 0: nx -= 1; break;
        case 1: nx += 1; break;
        case 2: ny -= 1; break;
        case 3: ny += 1; break;
        default: break;
      }
      if (nx >= 1 && nx <= lv.width - 2 && ny >= env_detail::kDodgeAgentMinRow &&
          ny <= lv.height - 2) {
        st.agent_x = nx;
        st.agent_y = ny;
      }
    }

    // Bullet travels two cells per tick, checking the boss block after each.
    const int bx = env_detail::boss_patrol_x(lv, st.tick);
    for (int sub = 0; sub < 2 && st.bullet_active; ++sub) {
      st.bullet_y -= 1;
      const bool in_boss = st.boss_hp > 0 && st.bullet_y >= lv.boss_y &&
                           st.bullet_y <= lv.boss_y + 1 && st.bullet_x >= bx &&
                           st.bullet_x <= bx + 1;
      if (in_boss) {
        st.bullet_active = false;
        st.boss_hp -= 1;
        reward += 1.0;
        if (st.boss_hp == 0) {
          // Defeat bonus tops the full-clear return up to exactly 12.
          reward += 12.0 - lv.boss_health;
          st.done = true;
        }
      } else if (st.bullet_y < lv.boss_y) {
        st.bullet_active = false;
      }
    }

    // Laser contact after all motion.
    if (!st.done) {
      for (const auto& lc : env_detail::laser_columns(lv, st.tick)) {
        if (lc.phase == env_detail::LaserPhase::active && lc.x == st.agent_x &&
            st.agent_y >= env_detail::laser_top_row(lv)) {
          st.done = true;
        }
      }
    }
  }

  if (!st.done && st.tick >= st.max_episode_len) st.done = true;

  st.episode_return += reward;
  StepResult res;
  res.task_reward = reward;
  res.done = st.done;
  res.obs = render(st);
  return {st, std::move(res)};
}

inline std::string LevelSpec::dump() const {
  std::ostringstream os;
  os << "game=" << game_name(game) << " seed=" << seed << " palette=" << palette_id;
  if (game == GameId::dodge_fight) {
    os << " boss=(" << boss_x << "," << boss_y << ") health=" << boss_health
       << " laser=" << laser_pattern << " texture=" << texture_id;
  }
  os << "\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      char c = '.';
      if (game == GameId::coin_seek) {
        switch (at(x, y)) {
          case Cell::empty: c = '.'; break;
          case Cell::wall: c = '#'; break;
          case Cell::gap: c = '_'; break;
          case Cell::hazard: c = 'x'; break;
          case Cell::coin: c = 'C'; break;
          case Cell::spawn: c = 'S'; break;
        }
      } else {
        if (x >= boss_x && x <= boss_x + 1 && y >= boss_y && y <= boss_y + 1) c = 'B';
        if (x == spawn_x && y == spawn_y) c = 'S';
      }
      os << c;
    }
    os << "\n";
  }
  return os.str();
}

/// Sequential draws from the unbounded test range [train_count, 2^32).
class TestSeedSampler {
 public:
  TestSeedSampler(uint64_t lo, uint64_t meta_seed) : rng_(meta_seed), lo_(lo) {}
  uint64_t draw() { return lo_ + rng_.uniform_int((uint64_t{1} << 32) - lo_); }

 private:
  Rng rng_;
  uint64_t lo_;
};

struct SeedSplit {
  std::vector<uint64_t> train_seeds;
  TestSeedSampler test_sampler;
};

/// Train seeds are exactly {start .. start+train_count-1} (start defaults to
/// 0, the usual benchmark convention); test seeds are drawn from the
/// disjoint tail of the 32-bit range.
inline SeedSplit seed_split(uint64_t train_count, uint64_t meta_seed, uint64_t start = 0) {
  if (train_count < 1) throw ContractError("seed_split: train_count must be >= 1");
  SeedSplit s{{}, TestSeedSampler(start + train_count, meta_seed)};
  s.train_seeds.resize(train_count);
  for (uint64_t i = 0; i < train_count; ++i) s.train_seeds[i] = start + i;
  return s;
}

}  // namespace srl
