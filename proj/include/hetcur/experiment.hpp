#pragma once

// Training loop: runners, rollout collection against frozen snapshots and the
// serialized per-cycle update (counts -> intrinsic normalisation -> PPO ->
// metrics).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "hetcur/config.hpp"
#include "hetcur/curiosity.hpp"
#include "hetcur/env_grid.hpp"
#include "hetcur/error.hpp"
#include "hetcur/metrics.hpp"
#include "hetcur/nn/adam.hpp"
#include "hetcur/nn/mlp.hpp"
#include "hetcur/ppo.hpp"
#include "hetcur/skills.hpp"

namespace hetcur {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream-specific seed so that actors, critics and runners draw from
/// unrelated generators.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t v : {tag, a, b}) {
    s ^= v + 0x632be59bd9b4e019ULL;
    out ^= splitmix64(s);
  }
  return out;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverse-CDF draw. Zero-probability entries are never returned.
inline std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  std::size_t last_positive = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    last_positive = i;
    if (u < cum) return i;
  }
  if (last_positive == probs.size()) throw Error(Errc::NonFinite, "policy has no positive probability");
  return last_positive;
}

struct Runner {
  int agent = 0;
  int slot = 0;
  EnvState state;
  std::vector<double> obs;
  double episode_return = 0.0;
  std::mt19937_64 rng;
  curiosity::IntrinsicNormalizer normalizer;
};

struct CompletedEpisode {
  bool success = false;
  bool via_corridor = false;
  int steps = 0;
  double return_ext = 0.0;
  friend bool operator==(const CompletedEpisode&, const CompletedEpisode&) = default;
};

struct CollectedRollout {
  ppo::Rollout rollout;
  std::vector<curiosity::Experience> experiences;
  std::vector<CompletedEpisode> episodes;
};

/// Everything a runner reads while collecting. All pointees stay frozen.
struct RolloutContext {
  const GridMap* map = nullptr;
  const SkillProfile* profile = nullptr;
  std::vector<double> skill_onehot;
  curiosity::KeyMode key_mode = curiosity::KeyMode::State;
  int length = 50;
  int max_steps = 600;
};

/// Maps an observation to probabilities over the agent's own actions.
using PolicyFn = std::function<nn::PolicyOutput(std::span<const double>)>;

inline PolicyFn network_policy(const nn::MlpParams& actor) {
  return [&actor](std::span<const double> obs) { return nn::forward_policy(actor, obs); };
}

/// Count key for the transition (s_t, a_t) -> s_{t+1}: the reached bin when
/// keyed by state, the departure bin and action when keyed by state-action.
inline curiosity::CountKey transition_key(curiosity::KeyMode mode, Cell from, Action a, Cell to) {
  if (mode == curiosity::KeyMode::State) return {to, std::nullopt};
  return {from, a};
}

inline void reset_runner(Runner& r, const GridMap& map) {
  auto rr = reset(map);
  r.state = std::move(rr.state);
  r.obs = std::move(rr.observation);
  r.episode_return = 0.0;
}

/// Steps the runner's environment `ctx.length` times. Episodes finishing
/// inside the segment are reset in place and reported in `episodes`.
inline CollectedRollout collect_rollout(Runner& runner, const RolloutContext& ctx, const PolicyFn& policy,
                                        const nn::MlpParams& critic, const curiosity::CountTable& table) {
  const GridMap& map = *ctx.map;
  const SkillProfile& profile = *ctx.profile;
  CollectedRollout out;
  auto& ro = out.rollout;
  ro.agent_id = profile.agent_id;
  ro.skill_onehot = ctx.skill_onehot;
  const auto T = static_cast<std::size_t>(ctx.length);
  ro.observations.reserve(T);

  for (std::size_t t = 0; t < T; ++t) {
    const nn::PolicyOutput pol = policy(runner.obs);
    if (pol.probs.size() != profile.size()) throw Error(Errc::IndexMismatch, "policy width differs from profile");
    const std::size_t k = sample_index(pol.probs, runner.rng);
    const Action action = profile.actions[k];
    double logp;
    if (pol.logits.size() == pol.probs.size()) {
      double mx = -std::numeric_limits<double>::infinity();
      for (double z : pol.logits) mx = std::max(mx, z);
      double s = 0.0;
      for (double z : pol.logits) s += std::exp(z - mx);
      logp = pol.logits[k] - mx - std::log(s);
    } else {
      logp = std::log(pol.probs[k]);
    }
    const nn::CriticOutput q = nn::forward_critic(critic, runner.obs, ctx.skill_onehot);

    const Cell from = runner.state.pos;
    StepOutcome so = step(runner.state, map, action, ctx.max_steps);
    const auto key = transition_key(ctx.key_mode, from, action, so.info.bin);

    ro.observations.push_back(std::move(runner.obs));
    ro.actions.push_back(action);
    ro.log_prob_old.push_back(logp);
    ro.reward_ext.push_back(so.reward_ext);
    ro.reward_int.push_back(curiosity::intrinsic_reward(table, key));
    ro.q_ext_rows.push_back(q.q_ext);
    ro.q_int_rows.push_back(q.q_int);
    ro.policy_probs.push_back(pol.probs);
    ro.dones.push_back(so.done ? 1 : 0);
    ro.bins.push_back(from);
    out.experiences.push_back({key, action});

    runner.episode_return += so.reward_ext;
    if (so.done) {
      out.episodes.push_back({so.reached_goal, runner.state.visited_corridor, runner.state.step_count,
                              runner.episode_return});
      reset_runner(runner, map);
    } else {
      runner.obs = std::move(so.observation);
    }
  }
  const nn::PolicyOutput next = policy(runner.obs);
  const nn::CriticOutput nq = nn::forward_critic(critic, runner.obs, ctx.skill_onehot);
  ro.next_probs = next.probs;
  ro.next_q_ext = nq.q_ext;
  ro.next_q_int = nq.q_int;
  return out;
}

struct TrainState {
  ExperimentConfig config;
  GridMap map;
  std::vector<SkillProfile> profiles;
  ActionUniverse universe;
  std::vector<Action> mutual;
  std::vector<ppo::Learner> actors;
  /// One entry when the critic is centralized, one per agent otherwise.
  std::vector<ppo::Learner> critics;
  curiosity::TableSet tables;
  /// Interleaved: agent 0 runner 0, agent 1 runner 0, agent 0 runner 1, ...
  std::vector<Runner> runners;
  std::vector<long> episodes_done;
  long cycle = 0;
  std::uint64_t total_steps = 0;
  metrics::MetricsLog log;

  [[nodiscard]] std::size_t num_agents() const { return profiles.size(); }
  [[nodiscard]] std::size_t critic_index(int agent) const {
    return critics.size() == 1 ? 0 : static_cast<std::size_t>(agent);
  }
  [[nodiscard]] std::vector<double> skill_onehot(int agent) const {
    std::vector<double> v(profiles.size(), 0.0);
    v[static_cast<std::size_t>(agent)] = 1.0;
    return v;
  }
  [[nodiscard]] bool agent_finished(int agent) const {
    return episodes_done[static_cast<std::size_t>(agent)] >= config.episodes;
  }
  [[nodiscard]] bool finished() const {
    for (std::size_t a = 0; a < profiles.size(); ++a) {
      if (!agent_finished(static_cast<int>(a))) return false;
    }
    return true;
  }
  /// Mixing weight for the agent's next update: zero once it has completed
  /// `curiosity_cutoff_episode` episodes.
  [[nodiscard]] double beta_for(int agent) const {
    if (config.curiosity_cutoff_episode && episodes_done[static_cast<std::size_t>(agent)] >= *config.curiosity_cutoff_episode) {
      return 0.0;
    }
    return config.beta;
  }
};

inline GridMap load_experiment_map(const ExperimentConfig& c) {
  return c.map_text.empty() ? load_map(c.map_path) : parse_map(c.map_text);
}

inline TrainState build_experiment(const ExperimentConfig& config) {
  validate(config);
  TrainState s;
  s.config = config;
  s.map = load_experiment_map(config);
  s.profiles = build_profiles(config);
  s.universe = action_universe(s.profiles);
  s.mutual = mutual_action_space(s.profiles);
  const int obs = static_cast<int>(observation_size(s.map));
  const int n = static_cast<int>(s.profiles.size());
  const auto& hidden = config.ppo.hidden;

  for (int a = 0; a < n; ++a) {
    auto p = nn::make_actor(obs, static_cast<int>(s.profiles[static_cast<std::size_t>(a)].size()), hidden,
                            derive_seed(config.seed, 1, static_cast<std::uint64_t>(a)));
    auto o = nn::make_optimizer(p, config.ppo.lr);
    s.actors.push_back({std::move(p), std::move(o)});
  }
  const int num_critics = wiring(config.mode).centralized_critic ? 1 : n;
  for (int c = 0; c < num_critics; ++c) {
    auto p = nn::make_critic(obs, n, static_cast<int>(s.universe.size()), hidden,
                             derive_seed(config.seed, 2, static_cast<std::uint64_t>(c)));
    auto o = nn::make_optimizer(p, config.ppo.lr);
    s.critics.push_back({std::move(p), std::move(o)});
  }
  for (int a = 0; a < n; ++a) {
    s.tables.emplace(a, curiosity::CountTable(a, s.map.width(), s.map.height(), config.curiosity.key_mode));
  }
  for (int r = 0; r < config.runners_per_agent; ++r) {
    for (int a = 0; a < n; ++a) {
      Runner run;
      run.agent = a;
      run.slot = r;
      run.rng.seed(derive_seed(config.seed, 3, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(r)));
      run.normalizer = curiosity::IntrinsicNormalizer(config.ppo.gamma, config.curiosity.episodic);
      reset_runner(run, s.map);
      s.runners.push_back(std::move(run));
    }
  }
  s.episodes_done.assign(static_cast<std::size_t>(n), 0);
  s.log.width = s.map.width();
  s.log.height = s.map.height();
  s.log.bucket_size = config.dominance_bucket;
  return s;
}

inline RolloutContext rollout_context(const TrainState& s, int agent) {
  RolloutContext ctx;
  ctx.map = &s.map;
  ctx.profile = &s.profiles[static_cast<std::size_t>(agent)];
  ctx.skill_onehot = s.skill_onehot(agent);
  ctx.key_mode = s.config.curiosity.key_mode;
  ctx.length = s.config.ppo.rollout_length;
  ctx.max_steps = s.config.max_steps_per_episode;
  return ctx;
}

/// One cycle: every runner whose agent still has budget collects a rollout
/// against the current (frozen) parameters and tables, then the updates are
/// applied one rollout at a time in runner order. Returns false once every
/// agent has reached its episode budget.
inline bool run_cycle(TrainState& s) {
  if (s.finished()) return false;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < s.runners.size(); ++i) {
    if (!s.agent_finished(s.runners[i].agent)) active.push_back(i);
  }
  std::vector<CollectedRollout> collected(active.size());
  auto collect = [&](std::size_t k) {
    Runner& r = s.runners[active[k]];
    const auto ctx = rollout_context(s, r.agent);
    collected[k] = collect_rollout(r, ctx, network_policy(s.actors[static_cast<std::size_t>(r.agent)].params),
                                   s.critics[s.critic_index(r.agent)].params, s.tables.at(r.agent));
  };
  const auto threads = static_cast<std::size_t>(std::max(1, s.config.threads));
  if (threads == 1 || active.size() < 2) {
    for (std::size_t k = 0; k < active.size(); ++k) collect(k);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < active.size(); k += threads) collect(k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t k = 0; k < active.size(); ++k) {
    Runner& r = s.runners[active[k]];
    const auto a = static_cast<std::size_t>(r.agent);
    auto& c = collected[k];
    auto& ro = c.rollout;
    const SkillProfile& profile = s.profiles[a];
    s.total_steps += ro.size();

    curiosity::update_counts(c.experiences, profile, s.tables, s.config.curiosity, s.mutual);
    if (s.config.curiosity.normalize) {
      const std::span<const std::uint8_t> dones =
          s.config.curiosity.episodic ? std::span<const std::uint8_t>(ro.dones) : std::span<const std::uint8_t>();
      ro.reward_int = curiosity::normalize_intrinsic(ro.reward_int, dones, r.normalizer);
    }
    const double beta = s.beta_for(r.agent);
    const auto diag = ppo::train_on_rollout(ro, s.actors[a], s.critics[s.critic_index(r.agent)], profile, s.universe,
                                            s.config.ppo, beta);
    metrics::record_dominance(s.log, r.agent, s.episodes_done[a], ro.bins, diag.advantages.ext_dominant);

    metrics::DiagnosticsRow row;
    row.cycle = s.cycle;
    row.agent_id = r.agent;
    row.runner = r.slot;
    row.episode_count = s.episodes_done[a];
    row.beta = beta;
    row.mean_ratio = diag.mean_ratio;
    row.clip_fraction = diag.clip_fraction;
    row.entropy = diag.entropy;
    row.adv_ext_abs = diag.adv_ext_abs;
    row.adv_int_abs = diag.adv_int_abs;
    row.critic_loss = diag.critic_loss_per_epoch.back();
    row.policy_loss = diag.policy_loss;
    double dom = 0.0;
    for (auto f : diag.advantages.ext_dominant) dom += f;
    row.ext_dominant_fraction = dom / static_cast<double>(ro.size());
    s.log.diagnostics.push_back(row);

    for (const auto& e : c.episodes) {
      s.log.records.push_back({r.agent, s.episodes_done[a]++, e.success, e.via_corridor, e.steps, e.return_ext});
    }
  }
  ++s.cycle;
  return !s.finished();
}

struct RunOptions {
  /// Polled between cycles; when set the run stops with a partial log.
  const std::atomic<bool>* stop = nullptr;
  /// Called after each cycle.
  std::function<void(const TrainState&)> on_cycle;
};

/// Runs cycles until the episode budget is met or a stop is requested.
/// Returns true when the budget was met.
inline bool run_experiment(TrainState& s, const RunOptions& opts = {}) {
  while (!s.finished()) {
    if (opts.stop && opts.stop->load()) return false;
    run_cycle(s);
    if (opts.on_cycle) opts.on_cycle(s);
  }
  return true;
}

inline metrics::MetricsLog run_experiment(const ExperimentConfig& config, const RunOptions& opts = {}) {
  TrainState s = build_experiment(config);
  run_experiment(s, opts);
  return std::move(s.log);
}

}  // namespace hetcur
