#pragma once

// Deterministic door-gated gridworld.
//
// Map text alphabet:
//   '#' wall   '.' floor   'C' corridor floor   'D' door   'S' spawn   'G' goal
// Coordinates are (x, y) with x the column and y the row, row 0 first.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hetcur/actions.hpp"
#include "hetcur/error.hpp"

namespace hetcur {

struct Cell {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Orientation : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

constexpr Orientation turn_left(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 3) % 4);
}
constexpr Orientation turn_right(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 1) % 4);
}
constexpr Cell ahead(Cell c, Orientation o) {
  switch (o) {
    case Orientation::N: return {c.x, c.y - 1};
    case Orientation::E: return {c.x + 1, c.y};
    case Orientation::S: return {c.x, c.y + 1};
    case Orientation::W: return {c.x - 1, c.y};
  }
  return c;
}

enum class Tile : std::uint8_t { Wall, Floor, Door, Spawn, Goal };

class GridMap {
 public:
  GridMap() = default;

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] Cell spawn() const { return spawn_; }
  [[nodiscard]] Cell goal() const { return goal_; }
  [[nodiscard]] const std::vector<Cell>& door_cells() const { return doors_; }
  [[nodiscard]] const std::vector<Cell>& corridor_cells() const { return corridor_list_; }

  [[nodiscard]] bool in_bounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  [[nodiscard]] std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.x);
  }
  [[nodiscard]] Tile tile(Cell c) const { return in_bounds(c) ? tiles_[index(c)] : Tile::Wall; }
  [[nodiscard]] bool is_corridor(Cell c) const { return in_bounds(c) && corridor_[index(c)] != 0; }

  /// Index into door_cells(), or nullopt if `c` is not a door.
  [[nodiscard]] std::optional<std::size_t> door_index(Cell c) const {
    auto it = std::find(doors_.begin(), doors_.end(), c);
    if (it == doors_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - doors_.begin());
  }

  /// Walkable without opening anything (floor, corridor, spawn, goal).
  [[nodiscard]] bool is_open_floor(Cell c) const {
    const Tile t = tile(c);
    return t == Tile::Floor || t == Tile::Spawn || t == Tile::Goal;
  }

  /// Re-renders the map in the text alphabet it was parsed from.
  [[nodiscard]] std::string to_text() const {
    std::string out;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const Cell c{x, y};
        switch (tile(c)) {
          case Tile::Wall: out += '#'; break;
          case Tile::Door: out += 'D'; break;
          case Tile::Spawn: out += 'S'; break;
          case Tile::Goal: out += 'G'; break;
          case Tile::Floor: out += is_corridor(c) ? 'C' : '.'; break;
        }
      }
      out += '\n';
    }
    return out;
  }

  friend GridMap parse_map(std::string_view text);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Tile> tiles_;
  std::vector<std::uint8_t> corridor_;
  std::vector<Cell> corridor_list_;
  std::vector<Cell> doors_;
  Cell spawn_{};
  Cell goal_{};
};

namespace detail {

// Cells reachable from `start` by 4-neighbour moves. Doors are passable iff
// `doors_passable`; the goal is absorbing (an episode ends on entering it).
inline std::vector<std::uint8_t> flood_fill(const GridMap& map, Cell start, bool doors_passable) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(map.width() * map.height()), 0);
  std::queue<Cell> frontier;
  seen[map.index(start)] = 1;
  frontier.push(start);
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop();
    if (c == map.goal()) continue;
    for (int o = 0; o < 4; ++o) {
      const Cell n = ahead(c, static_cast<Orientation>(o));
      if (!map.in_bounds(n) || seen[map.index(n)]) continue;
      const Tile t = map.tile(n);
      if (t == Tile::Wall || (t == Tile::Door && !doors_passable)) continue;
      seen[map.index(n)] = 1;
      frontier.push(n);
    }
  }
  return seen;
}

}  // namespace detail

inline GridMap parse_map(std::string_view text) {
  std::vector<std::string> rows;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string row(text.substr(start, end - start));
      if (!row.empty() && row.back() == '\r') row.pop_back();
      rows.push_back(std::move(row));
      start = end + 1;
    }
    while (!rows.empty() && rows.back().empty()) rows.pop_back();
  }
  if (rows.empty()) throw Error(Errc::MapTooSmall, "empty map");

  const std::size_t width = rows.front().size();
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != width) {
      throw Error(Errc::NonRectangular, "row " + std::to_string(y) + " has length " +
                                            std::to_string(rows[y].size()) + ", expected " +
                                            std::to_string(width));
    }
  }

  GridMap map;
  map.width_ = static_cast<int>(width);
  map.height_ = static_cast<int>(rows.size());
  map.tiles_.assign(width * rows.size(), Tile::Wall);
  map.corridor_.assign(width * rows.size(), 0);

  int spawns = 0;
  int goals = 0;
  for (int y = 0; y < map.height_; ++y) {
    for (int x = 0; x < map.width_; ++x) {
      const Cell c{x, y};
      const char ch = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      Tile t = Tile::Wall;
      switch (ch) {
        case '#': t = Tile::Wall; break;
        case '.': t = Tile::Floor; break;
        case 'C':
          t = Tile::Floor;
          map.corridor_[map.index(c)] = 1;
          map.corridor_list_.push_back(c);
          break;
        case 'D':
          t = Tile::Door;
          map.doors_.push_back(c);
          break;
        case 'S':
          t = Tile::Spawn;
          map.spawn_ = c;
          ++spawns;
          break;
        case 'G':
          t = Tile::Goal;
          map.goal_ = c;
          ++goals;
          break;
        default:
          throw Error(Errc::UnknownCharacter, std::string("character '") + ch + "' at (" +
                                                  std::to_string(x) + "," + std::to_string(y) +
                                                  ")");
      }
      map.tiles_[map.index(c)] = t;
    }
  }

  if (map.width_ < 3 || map.height_ < 3) throw Error(Errc::MapTooSmall, "map must be at least 3x3");
  if (goals == 0) throw Error(Errc::MissingGoal, "no 'G' cell");
  if (goals > 1) throw Error(Errc::MultipleGoals, "more than one 'G' cell");
  if (spawns == 0) throw Error(Errc::MissingSpawn, "no 'S' cell");
  if (spawns > 1) throw Error(Errc::MultipleSpawns, "more than one 'S' cell");

  for (int y = 0; y < map.height_; ++y) {
    for (int x = 0; x < map.width_; ++x) {
      const bool border = x == 0 || y == 0 || x == map.width_ - 1 || y == map.height_ - 1;
      if (border && map.tile({x, y}) != Tile::Wall) {
        throw Error(Errc::OpenBorder,
                    "border cell (" + std::to_string(x) + "," + std::to_string(y) + ") is not a wall");
      }
    }
  }

  for (const Cell d : map.doors_) {
    int open_neighbours = 0;
    for (int o = 0; o < 4; ++o) {
      if (map.is_open_floor(ahead(d, static_cast<Orientation>(o)))) ++open_neighbours;
    }
    if (open_neighbours < 2) {
      throw Error(Errc::DanglingDoor, "door at (" + std::to_string(d.x) + "," + std::to_string(d.y) +
                                          ") does not gate a passage");
    }
  }

  if (!detail::flood_fill(map, map.spawn_, true)[map.index(map.goal_)]) {
    throw Error(Errc::UnreachableGoal, "goal unreachable from spawn even with all doors open");
  }
  const auto closed = detail::flood_fill(map, map.spawn_, false);
  for (const Cell c : map.corridor_list_) {
    if (closed[map.index(c)]) {
      throw Error(Errc::CorridorNotGated, "corridor cell (" + std::to_string(c.x) + "," +
                                              std::to_string(c.y) + ") reachable without a door");
    }
  }
  return map;
}

inline GridMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open map file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str());
}

struct EnvState {
  Cell pos{};
  Orientation orient = Orientation::E;
  std::vector<std::uint8_t> doors_open;
  int step_count = 0;
  bool done = false;
  bool visited_corridor = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepInfo {
  Cell bin{};
  bool via_corridor_so_far = false;
  Action action_executed = Action::Noop;
};

struct StepOutcome {
  std::vector<double> observation;
  double reward_ext = 0.0;
  bool done = false;
  bool reached_goal = false;
  StepInfo info;
};

[[nodiscard]] inline std::size_t observation_size(const GridMap& map) {
  return static_cast<std::size_t>(map.width() + map.height() + 5);
}

/// True when the agent faces a door that is still closed.
[[nodiscard]] inline bool facing_closed_door(const EnvState& state, const GridMap& map) {
  const auto door = map.door_index(ahead(state.pos, state.orient));
  return door && state.doors_open[*door] == 0;
}

/// one-hot(x) ++ one-hot(y) ++ one-hot(orientation) ++ [facing a closed door].
[[nodiscard]] inline std::vector<double> encode_observation(const EnvState& state, const GridMap& map) {
  std::vector<double> obs(observation_size(map), 0.0);
  const auto w = static_cast<std::size_t>(map.width());
  const auto h = static_cast<std::size_t>(map.height());
  obs[static_cast<std::size_t>(state.pos.x)] = 1.0;
  obs[w + static_cast<std::size_t>(state.pos.y)] = 1.0;
  obs[w + h + static_cast<std::size_t>(state.orient)] = 1.0;
  obs[w + h + 4] = facing_closed_door(state, map) ? 1.0 : 0.0;
  return obs;
}

[[nodiscard]] inline EnvState initial_state(const GridMap& map) {
  EnvState s;
  s.pos = map.spawn();
  s.orient = Orientation::E;
  s.doors_open.assign(map.door_cells().size(), 0);
  return s;
}

struct ResetResult {
  EnvState state;
  std::vector<double> observation;
};

[[nodiscard]] inline ResetResult reset(const GridMap& map) {
  EnvState s = initial_state(map);
  auto obs = encode_observation(s, map);
  return {std::move(s), std::move(obs)};
}

/// Advances `state` by one action. Throws StateAlreadyDone / UnknownAction.
inline StepOutcome step(EnvState& state, const GridMap& map, Action action, int max_steps) {
  if (state.done || state.step_count >= max_steps) {
    throw Error(Errc::StateAlreadyDone, "step() on a finished episode");
  }
  if (!is_valid_action_id(action_id(action))) {
    throw Error(Errc::UnknownAction, "action id " + std::to_string(action_id(action)));
  }

  switch (action) {
    case Action::Forward: {
      const Cell target = ahead(state.pos, state.orient);
      bool passable = map.is_open_floor(target);
      if (!passable) {
        if (const auto door = map.door_index(target)) passable = state.doors_open[*door] != 0;
      }
      if (passable) state.pos = target;
      break;
    }
    case Action::TurnLeft: state.orient = turn_left(state.orient); break;
    case Action::TurnRight: state.orient = turn_right(state.orient); break;
    case Action::Noop: break;
    case Action::Open:
      if (const auto door = map.door_index(ahead(state.pos, state.orient))) {
        state.doors_open[*door] = 1;
      }
      break;
  }

  ++state.step_count;
  if (map.is_corridor(state.pos)) state.visited_corridor = true;

  StepOutcome out;
  if (state.pos == map.goal()) {
    state.done = true;
    out.reached_goal = true;
    out.reward_ext = 1.0;
  } else if (state.step_count >= max_steps) {
    state.done = true;
  }
  out.done = state.done;
  out.info = {state.pos, state.visited_corridor, action};
  out.observation = encode_observation(state, map);
  return out;
}

inline StepOutcome step(EnvState& state, const GridMap& map, int action, int max_steps) {
  return step(state, map, action_from_id(action), max_steps);
}

}  // namespace hetcur
