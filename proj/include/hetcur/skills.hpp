#pragma once

// Heterogeneous action spaces: per-agent skill profiles, their union (the
// critic's output ordering) and their intersection (the mutual action space).

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hetcur/actions.hpp"
#include "hetcur/error.hpp"

namespace hetcur {

struct SkillProfile {
  int agent_id = 0;
  std::string name;
  std::vector<Action> actions;  // sorted by action id, no duplicates

  [[nodiscard]] bool has(Action a) const {
    return std::find(actions.begin(), actions.end(), a) != actions.end();
  }
  /// Position of `a` in this agent's own policy output, if the agent has it.
  [[nodiscard]] std::optional<std::size_t> local_index(Action a) const {
    auto it = std::find(actions.begin(), actions.end(), a);
    if (it == actions.end()) return std::nullopt;
    return static_cast<std::size_t>(it - actions.begin());
  }
  [[nodiscard]] std::size_t size() const { return actions.size(); }
};

inline SkillProfile make_profile(int agent_id, std::string name, std::vector<Action> actions) {
  if (actions.empty()) throw Error(Errc::EmptyProfile, "agent " + name + " has no actions");
  for (Action a : actions) {
    if (!is_valid_action_id(action_id(a))) throw Error(Errc::UnknownAction, "in profile " + name);
  }
  std::sort(actions.begin(), actions.end());
  actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
  return SkillProfile{agent_id, std::move(name), std::move(actions)};
}

/// W0: the four common actions plus OPEN.
inline SkillProfile skilled_profile(int agent_id = 0) {
  return make_profile(agent_id, "W0",
                      {Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Noop, Action::Open});
}

/// W1: the four common actions only.
inline SkillProfile basic_profile(int agent_id = 1) {
  return make_profile(agent_id, "W1",
                      {Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Noop});
}

class ActionUniverse {
 public:
  ActionUniverse() = default;
  explicit ActionUniverse(std::vector<Action> actions) : actions_(std::move(actions)) {
    std::sort(actions_.begin(), actions_.end());
    actions_.erase(std::unique(actions_.begin(), actions_.end()), actions_.end());
  }

  [[nodiscard]] const std::vector<Action>& actions() const { return actions_; }
  [[nodiscard]] std::size_t size() const { return actions_.size(); }
  [[nodiscard]] std::optional<std::size_t> index_of(Action a) const {
    auto it = std::lower_bound(actions_.begin(), actions_.end(), a);
    if (it == actions_.end() || *it != a) return std::nullopt;
    return static_cast<std::size_t>(it - actions_.begin());
  }

 private:
  std::vector<Action> actions_;
};

inline void check_profiles(std::span<const SkillProfile> profiles) {
  if (profiles.empty()) throw Error(Errc::EmptyProfileList, "no skill profiles");
  std::set<int> ids;
  for (const auto& p : profiles) {
    if (p.actions.empty()) throw Error(Errc::EmptyProfile, "agent " + p.name + " has no actions");
    if (!ids.insert(p.agent_id).second) {
      throw Error(Errc::DuplicateAgentId, "agent id " + std::to_string(p.agent_id));
    }
  }
}

inline ActionUniverse action_universe(std::span<const SkillProfile> profiles) {
  check_profiles(profiles);
  std::vector<Action> all;
  for (const auto& p : profiles) all.insert(all.end(), p.actions.begin(), p.actions.end());
  return ActionUniverse(std::move(all));
}

inline std::vector<Action> mutual_action_space(std::span<const SkillProfile> profiles) {
  if (profiles.empty()) throw Error(Errc::EmptyProfileList, "no skill profiles");
  std::vector<Action> mutual = profiles.front().actions;
  for (const auto& p : profiles.subspan(1)) {
    std::vector<Action> next;
    std::set_intersection(mutual.begin(), mutual.end(), p.actions.begin(), p.actions.end(),
                          std::back_inserter(next));
    mutual = std::move(next);
  }
  return mutual;
}

/// Oracle used by trajectory filtering: can `profile` execute `action`?
inline bool is_reproducible(Action action, const SkillProfile& profile) {
  if (!is_valid_action_id(action_id(action))) {
    throw Error(Errc::UnknownAction, "action id " + std::to_string(action_id(action)));
  }
  return profile.has(action);
}

}  // namespace hetcur
