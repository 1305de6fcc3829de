#pragma once

// Count-based intrinsic rewards: visitation tables keyed by state bin or
// (state bin, action), the four sharing modes, trajectory-prefix filtering
// and normalisation by the std of discounted intrinsic returns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hetcur/actions.hpp"
#include "hetcur/env_grid.hpp"
#include "hetcur/error.hpp"
#include "hetcur/skills.hpp"

namespace hetcur::curiosity {

enum class Sharing : std::uint8_t { Independent, Centralized };
enum class KeyMode : std::uint8_t { State, StateAction };

struct CuriosityConfig {
  Sharing sharing = Sharing::Independent;
  KeyMode key_mode = KeyMode::State;
  bool filter = false;
  bool normalize = true;
  /// Reset the discounted-return filter at episode ends.
  bool episodic = true;

  friend bool operator==(const CuriosityConfig&, const CuriosityConfig&) = default;
};

inline void validate(const CuriosityConfig& c) {
  if (c.filter && (c.sharing != Sharing::Centralized || c.key_mode != KeyMode::StateAction)) {
    throw Error(Errc::InconsistentConfig, "filtering requires centralized state-action curiosity");
  }
}

struct CountKey {
  Cell bin{};
  std::optional<Action> action;  // present iff state-action keying

  friend bool operator==(const CountKey&, const CountKey&) = default;
};

/// Dense visitation table over a width x height bin grid (times the action
/// count when keyed by state-action). Absent keys read as zero.
class CountTable {
 public:
  CountTable() = default;
  CountTable(int owner, int width, int height, KeyMode mode)
      : owner_(owner), width_(width), height_(height), mode_(mode),
        counts_(static_cast<std::size_t>(width * height * (mode == KeyMode::StateAction ? kNumActions : 1)), 0) {}

  [[nodiscard]] int owner() const { return owner_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] KeyMode key_mode() const { return mode_; }

  [[nodiscard]] bool valid(const CountKey& k) const {
    if (k.bin.x < 0 || k.bin.y < 0 || k.bin.x >= width_ || k.bin.y >= height_) return false;
    if (mode_ == KeyMode::StateAction) return k.action && is_valid_action_id(action_id(*k.action));
    return !k.action;
  }

  [[nodiscard]] std::uint64_t count(const CountKey& k) const { return counts_[slot(k)]; }

  void increment(const CountKey& k, std::uint64_t by = 1) { counts_[slot(k)] += by; }

  [[nodiscard]] std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  /// Sum of counts for a bin over all actions.
  [[nodiscard]] std::uint64_t bin_total(Cell bin) const {
    if (mode_ == KeyMode::State) return count({bin, std::nullopt});
    std::uint64_t t = 0;
    for (int a = 0; a < kNumActions; ++a) t += count({bin, static_cast<Action>(a)});
    return t;
  }

  /// Nonzero entries, ordered by (y, x, action).
  [[nodiscard]] std::vector<std::pair<CountKey, std::uint64_t>> entries() const {
    std::vector<std::pair<CountKey, std::uint64_t>> out;
    const int per_bin = mode_ == KeyMode::StateAction ? kNumActions : 1;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        for (int a = 0; a < per_bin; ++a) {
          CountKey k{{x, y}, mode_ == KeyMode::StateAction ? std::optional<Action>(static_cast<Action>(a))
                                                          : std::nullopt};
          if (const auto c = count(k); c != 0) out.emplace_back(k, c);
        }
      }
    }
    return out;
  }

  friend bool operator==(const CountTable&, const CountTable&) = default;

 private:
  [[nodiscard]] std::size_t slot(const CountKey& k) const {
    if (!valid(k)) {
      throw Error(Errc::InvalidKey, "count key (" + std::to_string(k.bin.x) + "," + std::to_string(k.bin.y) +
                                        ") does not match the table");
    }
    const auto cell = static_cast<std::size_t>(k.bin.y * width_ + k.bin.x);
    if (mode_ == KeyMode::State) return cell;
    return cell * kNumActions + static_cast<std::size_t>(action_id(*k.action));
  }

  int owner_ = 0;
  int width_ = 0;
  int height_ = 0;
  KeyMode mode_ = KeyMode::State;
  std::vector<std::uint64_t> counts_;
};

/// 1 / sqrt(N(key) + 1): the bonus for the visit about to be counted.
/// Read-only; update_counts performs the increment.
inline double intrinsic_reward(const CountTable& table, const CountKey& key) {
  return 1.0 / std::sqrt(static_cast<double>(table.count(key)) + 1.0);
}

/// One collected experience as seen by the curiosity module.
struct Experience {
  CountKey key;
  Action action = Action::Noop;
};

/// Index b such that experiences [0, b) are withheld from the other agents:
/// one past the last action outside the mutual action space, or 0.
inline std::size_t filter_boundary(std::span<const Experience> trajectory, std::span<const Action> mutual) {
  std::size_t b = 0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (std::find(mutual.begin(), mutual.end(), trajectory[i].action) == mutual.end()) b = i + 1;
  }
  return b;
}

using TableSet = std::map<int, CountTable>;

/// Applies one collected trajectory to the per-agent tables according to the
/// sharing mode. Each delivered experience increments its key by one.
inline void update_counts(std::span<const Experience> trajectory, const SkillProfile& collector, TableSet& tables,
                          const CuriosityConfig& config, std::span<const Action> mutual) {
  validate(config);
  auto own = tables.find(collector.agent_id);
  if (own == tables.end()) {
    throw Error(Errc::MissingTable, "no count table for agent " + std::to_string(collector.agent_id));
  }
  for (const auto& e : trajectory) own->second.increment(e.key);
  if (config.sharing == Sharing::Independent) return;

  const std::size_t start = config.filter ? filter_boundary(trajectory, mutual) : 0;
  for (auto& [agent, table] : tables) {
    if (agent == collector.agent_id) continue;
    for (std::size_t i = start; i < trajectory.size(); ++i) table.increment(trajectory[i].key);
  }
}

// ---- Serialization: one "x,y[,action],count" line per nonzero entry --------

inline void write_counts(std::ostream& out, const CountTable& table) {
  const bool sa = table.key_mode() == KeyMode::StateAction;
  out << (sa ? "x,y,action,count\n" : "x,y,count\n");
  for (const auto& [k, c] : table.entries()) {
    out << k.bin.x << ',' << k.bin.y << ',';
    if (sa) out << action_name(*k.action) << ',';
    out << c << '\n';
  }
}

inline CountTable read_counts(std::istream& in, int owner, int width, int height) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::IoFailure, "empty count file");
  KeyMode mode;
  if (line == "x,y,count") mode = KeyMode::State;
  else if (line == "x,y,action,count") mode = KeyMode::StateAction;
  else throw Error(Errc::IoFailure, "unknown count header '" + line + "'");
  CountTable t(owner, width, height, mode);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    const std::size_t expect = mode == KeyMode::StateAction ? 4 : 3;
    if (f.size() != expect) throw Error(Errc::IoFailure, "bad count row '" + line + "'");
    CountKey k{{std::stoi(f[0]), std::stoi(f[1])}, std::nullopt};
    if (mode == KeyMode::StateAction) k.action = parse_action(f[2]);
    t.increment(k, std::stoull(f.back()));
  }
  return t;
}

// ---- Intrinsic reward normalisation ---------------------------------------

/// Welford accumulator of mean and population variance.
struct RunningMoments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  [[nodiscard]] double variance() const { return count > 0.0 ? m2 / count : 0.0; }
};

inline constexpr double kStdFloor = 1e-8;

/// Running std of discounted intrinsic returns R_t = r_t + gamma * R_{t-1}.
/// Reads as 1 until the first observation so early rewards pass unscaled.
class IntrinsicNormalizer {
 public:
  explicit IntrinsicNormalizer(double gamma = 0.99, bool episodic = true) : gamma_(gamma), episodic_(episodic) {}

  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] const RunningMoments& moments() const { return moments_; }
  [[nodiscard]] double running_return() const { return running_return_; }

  [[nodiscard]] double stddev() const {
    if (moments_.count == 0.0) return 1.0;
    return std::max(std::sqrt(moments_.variance()), kStdFloor);
  }

  /// Feeds one reward into the return filter; `done` ends the episode after it.
  void observe(double reward, bool done) {
    running_return_ = reward + gamma_ * running_return_;
    moments_.add(running_return_);
    if (done && episodic_) running_return_ = 0.0;
  }

 private:
  double gamma_;
  bool episodic_;
  double running_return_ = 0.0;
  RunningMoments moments_;
};

/// Divides each reward by the current running std, then updates the running
/// statistics with this segment's discounted returns. `dones` may be empty.
inline std::vector<double> normalize_intrinsic(std::span<const double> rewards, std::span<const std::uint8_t> dones,
                                               IntrinsicNormalizer& normalizer) {
  if (!dones.empty() && dones.size() != rewards.size()) {
    throw Error(Errc::LengthMismatch, "rewards and dones differ in length");
  }
  const double s = normalizer.stddev();
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] / s;
  for (std::size_t i = 0; i < rewards.size(); ++i) normalizer.observe(rewards[i], !dones.empty() && dones[i] != 0);
  return out;
}

inline std::vector<double> normalize_intrinsic(std::span<const double> rewards, IntrinsicNormalizer& normalizer) {
  return normalize_intrinsic(rewards, {}, normalizer);
}

}  // namespace hetcur::curiosity
