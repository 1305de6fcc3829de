#include <algorithm>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "hetcur/env_grid.hpp"
#include "hetcur/skills.hpp"
#include "test_util.hpp"

using namespace hetcur;
using hetcur::testing::default_map_path;
using hetcur::testing::small_map_path;

namespace {

const char* kTiny = "#####\n#S.G#\n#####\n#####\n#####\n";

// Door at (3,1) opens onto corridor (4,1)-(5,1) that ends at the goal; the long way round is 9 moves.
const char* kGated =
    "########\n"
    "#S.DCCG#\n"
    "#.####.#\n"
    "#......#\n"
    "########\n";

// Plain 4-neighbour BFS distance over open cells, doors passable on request.
int bfs_distance(const GridMap& map, bool through_doors, bool* used_corridor = nullptr) {
  std::vector<int> dist(static_cast<std::size_t>(map.width() * map.height()), -1);
  std::vector<Cell> parent(dist.size());
  std::queue<Cell> q;
  dist[map.index(map.spawn())] = 0;
  q.push(map.spawn());
  const int dx[] = {1, -1, 0, 0};
  const int dy[] = {0, 0, 1, -1};
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    if (c == map.goal()) {
      if (used_corridor) {
        *used_corridor = false;
        for (Cell p = c; !(p == map.spawn()); p = parent[map.index(p)]) *used_corridor |= map.is_corridor(p);
      }
      return dist[map.index(c)];
    }
    for (int k = 0; k < 4; ++k) {
      Cell n{c.x + dx[k], c.y + dy[k]};
      if (!map.in_bounds(n) || dist[map.index(n)] >= 0) continue;
      const Tile t = map.tile(n);
      if (t == Tile::Wall || (t == Tile::Door && !through_doors)) continue;
      dist[map.index(n)] = dist[map.index(c)] + 1;
      parent[map.index(n)] = c;
      q.push(n);
    }
  }
  return -1;
}

// Exhaustive search over (pos, orientation, doors) using the real dynamics.
std::set<std::pair<int, int>> reachable_cells(const GridMap& map, const SkillProfile& profile) {
  using Key = std::tuple<int, int, int, std::vector<std::uint8_t>>;
  std::set<Key> seen;
  std::set<std::pair<int, int>> cells;
  std::queue<EnvState> q;
  EnvState s0 = initial_state(map);
  q.push(s0);
  seen.insert({s0.pos.x, s0.pos.y, static_cast<int>(s0.orient), s0.doors_open});
  while (!q.empty()) {
    EnvState s = q.front();
    q.pop();
    cells.insert({s.pos.x, s.pos.y});
    if (s.done) continue;
    for (Action a : profile.actions) {
      EnvState n = s;
      n.step_count = 0;
      step(n, map, a, 1 << 30);
      Key k{n.pos.x, n.pos.y, static_cast<int>(n.orient), n.doors_open};
      if (seen.insert(k).second) q.push(n);
    }
  }
  return cells;
}

}  // namespace

TEST(ParseMap, MinimalMap) {
  const GridMap m = parse_map(kTiny);
  EXPECT_EQ(m.width(), 5);
  EXPECT_EQ(m.height(), 5);
  EXPECT_EQ(m.spawn(), (Cell{1, 1}));
  EXPECT_EQ(m.goal(), (Cell{3, 1}));
  EXPECT_TRUE(m.door_cells().empty());
  EXPECT_TRUE(m.corridor_cells().empty());
}

TEST(ParseMap, CorridorAndDoorCells) {
  const GridMap m = parse_map(kGated);
  ASSERT_EQ(m.door_cells().size(), 1u);
  EXPECT_EQ(m.door_cells()[0], (Cell{3, 1}));
  EXPECT_EQ(m.corridor_cells(), (std::vector<Cell>{{4, 1}, {5, 1}}));
  EXPECT_TRUE(m.is_corridor({4, 1}));
  EXPECT_FALSE(m.is_corridor({2, 1}));
  EXPECT_EQ(m.to_text(), kGated);
}

TEST(ParseMap, AcceptsCrLfAndTrailingBlankLines) {
  const GridMap m = parse_map("#####\r\n#S.G#\r\n#####\r\n\n\n");
  EXPECT_EQ(m.height(), 3);
}

TEST(ParseMap, Errors) {
  EXPECT_ERRC(parse_map("#####\n#S..#\n#####\n"), Errc::MissingGoal);
  EXPECT_ERRC(parse_map("#####\n#..G#\n#####\n"), Errc::MissingSpawn);
  EXPECT_ERRC(parse_map("######\n#SS.G#\n######\n"), Errc::MultipleSpawns);
  EXPECT_ERRC(parse_map("######\n#S.GG#\n######\n"), Errc::MultipleGoals);
  EXPECT_ERRC(parse_map("#####\n#S.G#\n####\n"), Errc::NonRectangular);
  EXPECT_ERRC(parse_map("#####\n#S?G#\n#####\n"), Errc::UnknownCharacter);
  EXPECT_ERRC(parse_map("#####\n#S#G#\n#####\n"), Errc::UnreachableGoal);
  EXPECT_ERRC(parse_map("##\n##\n"), Errc::MapTooSmall);
  EXPECT_ERRC(parse_map(""), Errc::MapTooSmall);
  EXPECT_ERRC(parse_map("#####\nS..G#\n#####\n"), Errc::OpenBorder);
  EXPECT_ERRC(parse_map("######\n#S.G.#\n#D####\n######\n"), Errc::DanglingDoor);
  EXPECT_ERRC(parse_map("#######\n#S.CCG#\n#######\n"), Errc::CorridorNotGated);
}

TEST(ParseMap, DoorOnlyPathStillReachable) {
  const GridMap m = parse_map("#####\n#SDG#\n#####\n");
  EXPECT_EQ(m.door_cells().size(), 1u);
}

class ShippedMap : public ::testing::TestWithParam<std::string> {};

TEST_P(ShippedMap, CorridorIsStrictlyShorterShortcut) {
  const GridMap m = load_map(GetParam());
  bool used_corridor = false;
  const int with_doors = bfs_distance(m, true, &used_corridor);
  const int doorless = bfs_distance(m, false);
  ASSERT_GT(with_doors, 0);
  ASSERT_GT(doorless, 0);
  EXPECT_LT(with_doors, doorless);
  EXPECT_TRUE(used_corridor);
  EXPECT_FALSE(m.corridor_cells().empty());
  EXPECT_FALSE(m.door_cells().empty());
}

TEST_P(ShippedMap, OnlyTheSkilledAgentReachesTheCorridor) {
  const GridMap m = load_map(GetParam());
  const auto w0 = reachable_cells(m, skilled_profile());
  const auto w1 = reachable_cells(m, basic_profile());
  auto touches = [&](const std::set<std::pair<int, int>>& cells) {
    return std::any_of(m.corridor_cells().begin(), m.corridor_cells().end(),
                       [&](Cell c) { return cells.count({c.x, c.y}) > 0; });
  };
  EXPECT_TRUE(touches(w0));
  EXPECT_FALSE(touches(w1));
  EXPECT_TRUE(w1.count({m.goal().x, m.goal().y}));
}

INSTANTIATE_TEST_SUITE_P(Maps, ShippedMap, ::testing::Values(default_map_path(), small_map_path()));

TEST(ShippedMap, DefaultMapSize) {
  const GridMap m = load_map(default_map_path());
  EXPECT_EQ(m.width(), 30);
  EXPECT_EQ(m.height(), 26);
}

TEST(LoadMap, MissingFile) { EXPECT_ERRC(load_map("/nonexistent/map.txt"), Errc::IoFailure); }

TEST(Reset, FreshStateAtSpawn) {
  const GridMap m = load_map(default_map_path());
  const auto r = reset(m);
  EXPECT_EQ(r.state.pos, m.spawn());
  EXPECT_EQ(r.state.orient, Orientation::E);
  EXPECT_EQ(r.state.step_count, 0);
  EXPECT_FALSE(r.state.done);
  EXPECT_EQ(r.state.doors_open.size(), m.door_cells().size());
  EXPECT_TRUE(std::all_of(r.state.doors_open.begin(), r.state.doors_open.end(), [](auto d) { return d == 0; }));
  EXPECT_EQ(r.observation, encode_observation(r.state, m));
}

TEST(Reset, IdenticalAfterFinishedEpisode) {
  const GridMap m = parse_map(kTiny);
  auto first = reset(m);
  step(first.state, m, Action::Forward, 10);
  step(first.state, m, Action::Forward, 10);
  ASSERT_TRUE(first.state.done);
  const auto second = reset(m);
  EXPECT_EQ(second.state, reset(m).state);
  EXPECT_EQ(second.observation, reset(m).observation);
}

TEST(Step, ForwardIntoWallDoesNotMove) {
  const GridMap m = parse_map(kTiny);
  EnvState s = initial_state(m);
  step(s, m, Action::TurnLeft, 10);
  const auto out = step(s, m, Action::Forward, 10);
  EXPECT_EQ(s.pos, (Cell{1, 1}));
  EXPECT_EQ(out.reward_ext, 0.0);
  EXPECT_FALSE(out.done);
  EXPECT_EQ(s.step_count, 2);
}

TEST(Step, TurnsRotateNinetyDegrees) {
  const GridMap m = parse_map(kTiny);
  EnvState s = initial_state(m);
  step(s, m, Action::TurnLeft, 10);
  EXPECT_EQ(s.orient, Orientation::N);
  step(s, m, Action::TurnLeft, 10);
  EXPECT_EQ(s.orient, Orientation::W);
  step(s, m, Action::TurnRight, 10);
  step(s, m, Action::TurnRight, 10);
  step(s, m, Action::TurnRight, 10);
  EXPECT_EQ(s.orient, Orientation::S);
  const auto before = s;
  step(s, m, Action::Noop, 10);
  EXPECT_EQ(s.pos, before.pos);
  EXPECT_EQ(s.orient, before.orient);
}

TEST(Step, OpenThenForwardEntersDoor) {
  const GridMap m = parse_map(kGated);
  EnvState s = initial_state(m);
  step(s, m, Action::Forward, 100);  // (2,1), facing the door
  EXPECT_TRUE(facing_closed_door(s, m));
  step(s, m, Action::Forward, 100);
  EXPECT_EQ(s.pos, (Cell{2, 1})) << "closed door blocks";
  step(s, m, Action::Open, 100);
  EXPECT_EQ(s.doors_open[0], 1);
  EXPECT_FALSE(facing_closed_door(s, m));
  step(s, m, Action::Forward, 100);
  EXPECT_EQ(s.pos, (Cell{3, 1}));
  EXPECT_FALSE(s.visited_corridor);
  const auto out = step(s, m, Action::Forward, 100);
  EXPECT_TRUE(out.info.via_corridor_so_far);
  EXPECT_EQ(out.info.bin, (Cell{4, 1}));
  EXPECT_EQ(out.info.action_executed, Action::Forward);
  step(s, m, Action::Forward, 100);
  const auto last = step(s, m, Action::Forward, 100);
  EXPECT_TRUE(last.done);
  EXPECT_TRUE(last.reached_goal);
  EXPECT_EQ(last.reward_ext, 1.0);
  EXPECT_TRUE(last.info.via_corridor_so_far);
}

TEST(Step, OpenElsewhereIsNoop) {
  const GridMap m = parse_map(kGated);
  EnvState s = initial_state(m);
  const auto before = s;
  step(s, m, Action::Open, 100);
  EXPECT_EQ(s.doors_open, before.doors_open);
  EXPECT_EQ(s.pos, before.pos);
}

TEST(Step, ReachingGoalGivesReward) {
  const GridMap m = parse_map(kTiny);
  EnvState s = initial_state(m);
  EXPECT_EQ(step(s, m, Action::Forward, 10).reward_ext, 0.0);
  const auto out = step(s, m, Action::Forward, 10);
  EXPECT_EQ(out.reward_ext, 1.0);
  EXPECT_TRUE(out.done);
  EXPECT_TRUE(out.reached_goal);
  EXPECT_FALSE(out.info.via_corridor_so_far);
}

TEST(Step, TimeoutEndsWithoutReward) {
  const GridMap m = parse_map(kTiny);
  EnvState s = initial_state(m);
  step(s, m, Action::Noop, 2);
  const auto out = step(s, m, Action::Noop, 2);
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.reached_goal);
  EXPECT_EQ(out.reward_ext, 0.0);
  EXPECT_EQ(s.step_count, 2);
}

TEST(Step, Errors) {
  const GridMap m = parse_map(kTiny);
  EnvState s = initial_state(m);
  EXPECT_ERRC(step(s, m, 7, 10), Errc::UnknownAction);
  EXPECT_ERRC(step(s, m, -1, 10), Errc::UnknownAction);
  step(s, m, Action::Forward, 10);
  step(s, m, Action::Forward, 10);
  EXPECT_ERRC(step(s, m, Action::Noop, 10), Errc::StateAlreadyDone);
}

TEST(Step, DeterministicAndBoundedUnderRandomActions) {
  const GridMap m = load_map(small_map_path());
  std::mt19937_64 rng(7);
  for (int episode = 0; episode < 50; ++episode) {
    EnvState a = initial_state(m);
    EnvState b = initial_state(m);
    while (!a.done) {
      const auto act = static_cast<int>(rng() % kNumActions);
      const auto oa = step(a, m, act, 120);
      const auto ob = step(b, m, act, 120);
      ASSERT_EQ(a, b);
      ASSERT_EQ(oa.observation, ob.observation);
      ASSERT_EQ(oa.reward_ext, ob.reward_ext);
      ASSERT_LE(a.step_count, 120);
      ASSERT_NE(m.tile(a.pos), Tile::Wall);
      if (const auto d = m.door_index(a.pos)) {
        ASSERT_EQ(a.doors_open[*d], 1);
      }
      ASSERT_EQ(oa.reward_ext == 1.0, oa.done && a.pos == m.goal());
    }
  }
}

TEST(Observation, OneHotLayout) {
  const GridMap m = parse_map(kTiny);
  const auto obs = encode_observation(initial_state(m), m);
  ASSERT_EQ(obs.size(), 15u);
  EXPECT_EQ(obs.size(), observation_size(m));
  std::vector<std::size_t> ones;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i] == 1.0) ones.push_back(i);
    else EXPECT_EQ(obs[i], 0.0);
  }
  EXPECT_EQ(ones, (std::vector<std::size_t>{1, 6, 11}));
  EXPECT_EQ(obs.back(), 0.0);
}

TEST(Observation, InjectiveOverPositions) {
  const GridMap m = load_map(small_map_path());
  std::set<std::vector<double>> seen;
  int cells = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.tile({x, y}) == Tile::Wall) continue;
      EnvState s = initial_state(m);
      s.pos = {x, y};
      seen.insert(encode_observation(s, m));
      ++cells;
    }
  }
  EXPECT_EQ(static_cast<int>(seen.size()), cells);
}

TEST(Observation, DoorBitIsTheOnlyDifference) {
  const GridMap m = parse_map(kGated);
  EnvState s = initial_state(m);
  s.pos = {2, 1};
  const auto closed = encode_observation(s, m);
  s.doors_open[0] = 1;
  const auto open = encode_observation(s, m);
  ASSERT_EQ(closed.size(), open.size());
  for (std::size_t i = 0; i + 1 < closed.size(); ++i) EXPECT_EQ(closed[i], open[i]);
  EXPECT_EQ(closed.back(), 1.0);
  EXPECT_EQ(open.back(), 0.0);
}
