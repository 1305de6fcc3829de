#pragma once

// Uniform-random agents on a map: success probe and the corridor-novelty
// measurement under shared state counts.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hetcur/curiosity.hpp"
#include "hetcur/env_grid.hpp"
#include "hetcur/error.hpp"
#include "hetcur/experiment.hpp"
#include "hetcur/skills.hpp"

namespace hetcur {

struct ProbeResult {
  long episodes = 0;
  long successes = 0;
  long corridor_successes = 0;
  double mean_success_steps = 0.0;

  [[nodiscard]] double success_rate() const {
    return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0.0;
  }
  [[nodiscard]] double corridor_share() const {
    return successes ? static_cast<double>(corridor_successes) / static_cast<double>(successes) : 0.0;
  }
};

struct RandomEpisode {
  bool success = false;
  bool via_corridor = false;
  int steps = 0;
  std::vector<curiosity::Experience> trajectory;
};

/// One episode of uniformly random actions from the profile.
inline RandomEpisode random_episode(const GridMap& map, const SkillProfile& profile, int max_steps,
                                    std::mt19937_64& rng, curiosity::KeyMode key_mode = curiosity::KeyMode::State,
                                    bool keep_trajectory = false) {
  EnvState s = initial_state(map);
  RandomEpisode ep;
  const auto n = static_cast<double>(profile.size());
  while (!s.done) {
    auto k = static_cast<std::size_t>(uniform01(rng) * n);
    const Action a = profile.actions[k];
    const Cell from = s.pos;
    const auto out = step(s, map, a, max_steps);
    if (keep_trajectory) ep.trajectory.push_back({transition_key(key_mode, from, a, out.info.bin), a});
    ep.success = out.reached_goal;
  }
  ep.via_corridor = s.visited_corridor;
  ep.steps = s.step_count;
  return ep;
}

inline ProbeResult probe_random(const GridMap& map, const SkillProfile& profile, long episodes, int max_steps,
                                std::uint64_t seed) {
  if (episodes < 1 || max_steps < 1) throw Error(Errc::InconsistentConfig, "episodes and max_steps must be >= 1");
  std::mt19937_64 rng(derive_seed(seed, 4, static_cast<std::uint64_t>(profile.agent_id)));
  ProbeResult r;
  double steps = 0.0;
  for (long e = 0; e < episodes; ++e) {
    const auto ep = random_episode(map, profile, max_steps, rng);
    ++r.episodes;
    if (ep.success) {
      ++r.successes;
      steps += ep.steps;
      if (ep.via_corridor) ++r.corridor_successes;
    }
  }
  if (r.successes) r.mean_success_steps = steps / static_cast<double>(r.successes);
  return r;
}

struct NoveltyProbe {
  double corridor_mean = 0.0;
  double mutual_mean = 0.0;
  std::size_t mutual_cells = 0;
};

/// Interleaves random episodes of every profile (round robin), feeding them
/// to centralized state-keyed counts. Returns the mean bonus 1/sqrt(N+1) over
/// the corridor cells and over visited cells reachable with every door shut,
/// as read from the last profile's table.
inline NoveltyProbe corridor_novelty(const GridMap& map, std::span<const SkillProfile> profiles,
                                     long episodes_per_agent, int max_steps, std::uint64_t seed) {
  check_profiles(profiles);
  curiosity::CuriosityConfig cfg;
  cfg.sharing = curiosity::Sharing::Centralized;
  cfg.key_mode = curiosity::KeyMode::State;
  curiosity::TableSet tables;
  for (const auto& p : profiles) {
    tables.emplace(p.agent_id, curiosity::CountTable(p.agent_id, map.width(), map.height(), cfg.key_mode));
  }
  const auto mutual = mutual_action_space(profiles);
  std::mt19937_64 rng(derive_seed(seed, 5));
  for (long e = 0; e < episodes_per_agent; ++e) {
    for (const auto& p : profiles) {
      const auto ep = random_episode(map, p, max_steps, rng, cfg.key_mode, true);
      curiosity::update_counts(ep.trajectory, p, tables, cfg, mutual);
    }
  }
  const auto& table = tables.at(profiles.back().agent_id);
  NoveltyProbe out;
  for (Cell c : map.corridor_cells()) out.corridor_mean += curiosity::intrinsic_reward(table, {c, std::nullopt});
  if (!map.corridor_cells().empty()) out.corridor_mean /= static_cast<double>(map.corridor_cells().size());
  const auto reach = detail::flood_fill(map, map.spawn(), false);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const Cell c{x, y};
      if (!reach[map.index(c)] || table.count({c, std::nullopt}) == 0) continue;
      out.mutual_mean += curiosity::intrinsic_reward(table, {c, std::nullopt});
      ++out.mutual_cells;
    }
  }
  if (out.mutual_cells) out.mutual_mean /= static_cast<double>(out.mutual_cells);
  return out;
}

}  // namespace hetcur
