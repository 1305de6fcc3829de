#pragma once

// Ablation modes and the experiment configuration, with a JSON loader.
//
// Config schema (every key optional; defaults shown by `hetcur run --print-config`):
//   {
//     "mode": "CC_CC_sh_action",           // IC_IC | CC_IC | CC_CC_sh | CC_CC_sh_action | CC_CC_sh_action_filter
//     "runners_per_agent": 3,
//     "episodes": 2000,                    // per agent, shared by its runners
//     "max_steps_per_episode": 600,
//     "beta": 0.3333333333333333,
//     "curiosity_cutoff_episode": null,    // beta drops to 0 once an agent has this many episodes
//     "seed": 0,
//     "map_path": "../maps/mwh_grid.txt",  // relative to the config file
//     "agents": [{"name": "W0", "actions": ["FORWARD", ...]}, ...],
//     "ppo": {"clip_eps", "entropy_coef", "epochs", "gamma", "gae_lambda", "lr",
//             "rollout_length", "normalize_advantages", "normalize_mixed",
//             "intrinsic_episodic",
//             "max_grad_norm", "hidden"},
//     "curiosity": {"sharing": "independent|centralized", "key": "state|state_action",
//                   "filter", "normalize", "episodic"},
//     "dominance_bucket": 500,
//     "sr_window": 100,
//     "threads": 1
//   }
// Curiosity sharing/key/filter default to what the mode prescribes; values that
// disagree with the mode are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hetcur/actions.hpp"
#include "hetcur/curiosity.hpp"
#include "hetcur/error.hpp"
#include "hetcur/ppo.hpp"
#include "hetcur/skills.hpp"

namespace hetcur {

enum class AblationMode : std::uint8_t { IC_IC, CC_IC, CC_CC_sh, CC_CC_sh_action, CC_CC_sh_action_filter };

inline constexpr AblationMode kAllModes[] = {AblationMode::IC_IC, AblationMode::CC_IC, AblationMode::CC_CC_sh,
                                             AblationMode::CC_CC_sh_action, AblationMode::CC_CC_sh_action_filter};

inline std::string mode_name(AblationMode m) {
  switch (m) {
    case AblationMode::IC_IC: return "IC_IC";
    case AblationMode::CC_IC: return "CC_IC";
    case AblationMode::CC_CC_sh: return "CC_CC_sh";
    case AblationMode::CC_CC_sh_action: return "CC_CC_sh_action";
    case AblationMode::CC_CC_sh_action_filter: return "CC_CC_sh_action_filter";
  }
  return "?";
}

inline AblationMode parse_mode(std::string_view s) {
  for (auto m : kAllModes) {
    if (mode_name(m) == s) return m;
  }
  throw Error(Errc::InconsistentConfig, "unknown mode '" + std::string(s) + "'");
}

/// Critic and curiosity wiring prescribed by a mode.
struct ModeWiring {
  bool centralized_critic = false;
  curiosity::CuriosityConfig curiosity;
};

inline ModeWiring wiring(AblationMode m) {
  using curiosity::KeyMode;
  using curiosity::Sharing;
  ModeWiring w;
  w.centralized_critic = m != AblationMode::IC_IC;
  w.curiosity.sharing = (m == AblationMode::IC_IC || m == AblationMode::CC_IC) ? Sharing::Independent
                                                                                : Sharing::Centralized;
  w.curiosity.key_mode = (m == AblationMode::CC_CC_sh_action || m == AblationMode::CC_CC_sh_action_filter)
                             ? KeyMode::StateAction
                             : KeyMode::State;
  w.curiosity.filter = m == AblationMode::CC_CC_sh_action_filter;
  return w;
}

struct AgentSpec {
  std::string name;
  std::vector<Action> actions;
};

inline std::vector<AgentSpec> default_agents() {
  const auto w0 = skilled_profile(0);
  const auto w1 = basic_profile(1);
  return {{w0.name, w0.actions}, {w1.name, w1.actions}};
}

struct ExperimentConfig {
  AblationMode mode = AblationMode::CC_CC_sh_action;
  int runners_per_agent = 3;
  long episodes = 2000;
  int max_steps_per_episode = 600;
  double beta = 1.0 / 3.0;
  std::optional<long> curiosity_cutoff_episode;
  std::uint64_t seed = 0;
  std::string map_path = "maps/mwh_grid.txt";
  /// Inline map text; takes precedence over map_path when non-empty.
  std::string map_text;
  std::vector<AgentSpec> agents = default_agents();
  ppo::PpoConfig ppo;
  curiosity::CuriosityConfig curiosity = wiring(AblationMode::CC_CC_sh_action).curiosity;
  long dominance_bucket = 500;
  std::size_t sr_window = 100;
  int threads = 1;
};

/// Default config for `mode` with the mode's curiosity wiring.
inline ExperimentConfig make_config(AblationMode mode) {
  ExperimentConfig c;
  c.mode = mode;
  c.curiosity = wiring(mode).curiosity;
  return c;
}

inline std::vector<SkillProfile> build_profiles(const ExperimentConfig& c) {
  std::vector<SkillProfile> out;
  for (std::size_t i = 0; i < c.agents.size(); ++i) {
    out.push_back(make_profile(static_cast<int>(i), c.agents[i].name, c.agents[i].actions));
  }
  check_profiles(out);
  return out;
}

inline void validate(const ExperimentConfig& c) {
  auto bad = [](const std::string& why) { return Error(Errc::InconsistentConfig, why); };
  if (c.runners_per_agent < 1) throw bad("runners_per_agent must be >= 1");
  if (c.episodes < 1) throw bad("episodes must be >= 1");
  if (c.max_steps_per_episode < 1) throw bad("max_steps_per_episode must be >= 1");
  if (!(c.beta >= 0.0)) throw bad("beta must be >= 0");
  if (c.curiosity_cutoff_episode && (*c.curiosity_cutoff_episode < 0 || *c.curiosity_cutoff_episode > c.episodes)) {
    throw bad("curiosity_cutoff_episode must lie in [0, episodes]");
  }
  if (c.dominance_bucket < 1) throw bad("dominance_bucket must be >= 1");
  if (c.sr_window < 1) throw bad("sr_window must be >= 1");
  if (c.threads < 1) throw bad("threads must be >= 1");
  if (c.agents.empty()) throw Error(Errc::EmptyProfileList, "no agents configured");
  ppo::validate(c.ppo);
  curiosity::validate(c.curiosity);
  const auto w = wiring(c.mode).curiosity;
  if (c.curiosity.sharing != w.sharing || c.curiosity.key_mode != w.key_mode || c.curiosity.filter != w.filter) {
    throw bad("curiosity settings do not match mode " + mode_name(c.mode));
  }
  (void)build_profiles(c);
}

// ---- JSON -----------------------------------------------------------------

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::read_opt;
  try {
    if (!j.is_object()) throw Error(Errc::InconsistentConfig, "config must be a JSON object");
    ExperimentConfig c;
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.curiosity = wiring(c.mode).curiosity;
    read_opt(j, "runners_per_agent", c.runners_per_agent);
    read_opt(j, "episodes", c.episodes);
    read_opt(j, "max_steps_per_episode", c.max_steps_per_episode);
    read_opt(j, "beta", c.beta);
    if (j.contains("curiosity_cutoff_episode") && !j.at("curiosity_cutoff_episode").is_null()) {
      c.curiosity_cutoff_episode = j.at("curiosity_cutoff_episode").get<long>();
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "map_text", c.map_text);
    if (j.contains("map_path")) {
      std::filesystem::path p = j.at("map_path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      c.map_path = p.lexically_normal().string();
    }
    if (j.contains("agents")) {
      c.agents.clear();
      for (const auto& a : j.at("agents")) {
        AgentSpec s;
        s.name = a.value("name", "W" + std::to_string(c.agents.size()));
        for (const auto& name : a.at("actions")) s.actions.push_back(parse_action(name.get<std::string>()));
        c.agents.push_back(std::move(s));
      }
    }
    if (j.contains("ppo")) {
      const auto& p = j.at("ppo");
      read_opt(p, "clip_eps", c.ppo.clip_eps);
      read_opt(p, "entropy_coef", c.ppo.entropy_coef);
      read_opt(p, "epochs", c.ppo.epochs);
      read_opt(p, "gamma", c.ppo.gamma);
      read_opt(p, "gae_lambda", c.ppo.gae_lambda);
      read_opt(p, "lr", c.ppo.lr);
      read_opt(p, "rollout_length", c.ppo.rollout_length);
      read_opt(p, "normalize_advantages", c.ppo.normalize_advantages);
      read_opt(p, "normalize_mixed", c.ppo.normalize_mixed);
      read_opt(p, "intrinsic_episodic", c.ppo.intrinsic_episodic);
      read_opt(p, "max_grad_norm", c.ppo.max_grad_norm);
      read_opt(p, "hidden", c.ppo.hidden);
    }
    if (j.contains("curiosity")) {
      const auto& q = j.at("curiosity");
      if (q.contains("sharing")) {
        const auto s = q.at("sharing").get<std::string>();
        if (s == "independent") c.curiosity.sharing = curiosity::Sharing::Independent;
        else if (s == "centralized") c.curiosity.sharing = curiosity::Sharing::Centralized;
        else throw Error(Errc::InconsistentConfig, "unknown curiosity sharing '" + s + "'");
      }
      if (q.contains("key")) {
        const auto s = q.at("key").get<std::string>();
        if (s == "state") c.curiosity.key_mode = curiosity::KeyMode::State;
        else if (s == "state_action") c.curiosity.key_mode = curiosity::KeyMode::StateAction;
        else throw Error(Errc::InconsistentConfig, "unknown curiosity key '" + s + "'");
      }
      read_opt(q, "filter", c.curiosity.filter);
      read_opt(q, "normalize", c.curiosity.normalize);
      read_opt(q, "episodic", c.curiosity.episodic);
    }
    read_opt(j, "dominance_bucket", c.dominance_bucket);
    read_opt(j, "sr_window", c.sr_window);
    read_opt(j, "threads", c.threads);
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InconsistentConfig, std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InconsistentConfig, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["mode"] = mode_name(c.mode);
  j["runners_per_agent"] = c.runners_per_agent;
  j["episodes"] = c.episodes;
  j["max_steps_per_episode"] = c.max_steps_per_episode;
  j["beta"] = c.beta;
  j["curiosity_cutoff_episode"] =
      c.curiosity_cutoff_episode ? nlohmann::json(*c.curiosity_cutoff_episode) : nlohmann::json(nullptr);
  j["seed"] = c.seed;
  if (c.map_text.empty()) j["map_path"] = c.map_path;
  else j["map_text"] = c.map_text;
  j["agents"] = nlohmann::json::array();
  for (const auto& a : c.agents) {
    nlohmann::json names = nlohmann::json::array();
    for (Action x : a.actions) names.push_back(action_name(x));
    j["agents"].push_back({{"name", a.name}, {"actions", names}});
  }
  j["ppo"] = {{"clip_eps", c.ppo.clip_eps},
              {"entropy_coef", c.ppo.entropy_coef},
              {"epochs", c.ppo.epochs},
              {"gamma", c.ppo.gamma},
              {"gae_lambda", c.ppo.gae_lambda},
              {"lr", c.ppo.lr},
              {"rollout_length", c.ppo.rollout_length},
              {"normalize_advantages", c.ppo.normalize_advantages},
              {"normalize_mixed", c.ppo.normalize_mixed},
              {"intrinsic_episodic", c.ppo.intrinsic_episodic},
              {"max_grad_norm", c.ppo.max_grad_norm},
              {"hidden", c.ppo.hidden}};
  j["curiosity"] = {
      {"sharing", c.curiosity.sharing == curiosity::Sharing::Centralized ? "centralized" : "independent"},
      {"key", c.curiosity.key_mode == curiosity::KeyMode::StateAction ? "state_action" : "state"},
      {"filter", c.curiosity.filter},
      {"normalize", c.curiosity.normalize},
      {"episodic", c.curiosity.episodic}};
  j["dominance_bucket"] = c.dominance_bucket;
  j["sr_window"] = c.sr_window;
  j["threads"] = c.threads;
  return j;
}

}  // namespace hetcur
