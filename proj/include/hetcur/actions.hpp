#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hetcur/error.hpp"

namespace hetcur {

/// The union action space of the scenario. Numeric values are stable ids.
enum class Action : std::uint8_t {
  Forward = 0,
  TurnLeft = 1,
  TurnRight = 2,
  Noop = 3,
  Open = 4,
};

inline constexpr int kNumActions = 5;

inline constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "FORWARD", "TURN_LEFT", "TURN_RIGHT", "NOOP", "OPEN"};

constexpr int action_id(Action a) { return static_cast<int>(a); }

constexpr bool is_valid_action_id(int id) { return id >= 0 && id < kNumActions; }

inline Action action_from_id(int id) {
  if (!is_valid_action_id(id)) {
    throw Error(Errc::UnknownAction, "action id " + std::to_string(id));
  }
  return static_cast<Action>(id);
}

constexpr std::string_view action_name(Action a) { return kActionNames[action_id(a)]; }

inline std::optional<Action> try_parse_action(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

inline Action parse_action(std::string_view name) {
  if (auto a = try_parse_action(name)) return *a;
  throw Error(Errc::UnknownAction, "unknown action name '" + std::string(name) + "'");
}

}  // namespace hetcur
