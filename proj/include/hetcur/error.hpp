#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetcur {

enum class Errc {
  // env_grid
  MissingGoal,
  MissingSpawn,
  MultipleSpawns,
  MultipleGoals,
  NonRectangular,
  UnknownCharacter,
  UnreachableGoal,
  MapTooSmall,
  OpenBorder,
  DanglingDoor,
  CorridorNotGated,
  StateAlreadyDone,
  UnknownAction,
  // skills
  EmptyProfileList,
  EmptyProfile,
  DuplicateAgentId,
  // nn_core
  InvalidLayerSizes,
  DimensionMismatch,
  NonFiniteLoss,
  ShapeMismatch,
  BadCheckpoint,
  // curiosity
  MissingTable,
  InvalidKey,
  // ppo_core
  IndexMismatch,
  LengthMismatch,
  NonFinite,
  // trainer / metrics
  InconsistentConfig,
  UnknownAgent,
  NoSuccessfulEpisodes,
  IoFailure,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingGoal: return "MissingGoal";
    case Errc::MissingSpawn: return "MissingSpawn";
    case Errc::MultipleSpawns: return "MultipleSpawns";
    case Errc::MultipleGoals: return "MultipleGoals";
    case Errc::NonRectangular: return "NonRectangular";
    case Errc::UnknownCharacter: return "UnknownCharacter";
    case Errc::UnreachableGoal: return "UnreachableGoal";
    case Errc::MapTooSmall: return "MapTooSmall";
    case Errc::OpenBorder: return "OpenBorder";
    case Errc::DanglingDoor: return "DanglingDoor";
    case Errc::CorridorNotGated: return "CorridorNotGated";
    case Errc::StateAlreadyDone: return "StateAlreadyDone";
    case Errc::UnknownAction: return "UnknownAction";
    case Errc::EmptyProfileList: return "EmptyProfileList";
    case Errc::EmptyProfile: return "EmptyProfile";
    case Errc::DuplicateAgentId: return "DuplicateAgentId";
    case Errc::InvalidLayerSizes: return "InvalidLayerSizes";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::MissingTable: return "MissingTable";
    case Errc::InvalidKey: return "InvalidKey";
    case Errc::IndexMismatch: return "IndexMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InconsistentConfig: return "InconsistentConfig";
    case Errc::UnknownAgent: return "UnknownAgent";
    case Errc::NoSuccessfulEpisodes: return "NoSuccessfulEpisodes";
    case Errc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code next to the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hetcur
