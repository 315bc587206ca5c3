#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "bevdrive/harness/matrix.hpp"

using namespace bevdrive;

namespace {

namespace fs = std::filesystem;

/// Policy that never moves.
class ZeroDriver : public EpisodeDriver {
 public:
  void reset(std::uint64_t) override {}
  VehicleControl act(const Simulation&, const Route&, TickInternals*) override {
    return {};
  }
  std::string name() const override { return "zero"; }
};

/// Policy that throws mid-episode.
class CrashingDriver : public EpisodeDriver {
 public:
  void reset(std::uint64_t) override { ticks_ = 0; }
  VehicleControl act(const Simulation&, const Route&, TickInternals*) override {
    if (++ticks_ > 20) throw std::runtime_error("boom");
    return {0.0, 0.5, 0.0};
  }
  std::string name() const override { return "crash"; }
  int ticks_ = 0;
};

Route straightEvalRoute(std::uint64_t seed) { return buildEvalRoute("straight", seed).route; }

WorldState egoAt(double x, double y, double yaw = 0.0, double speed = 0.0) {
  WorldState s;
  ActorState ego;
  ego.id = kEgoId;
  ego.pose = {{x, y}, yaw};
  ego.speed = speed;
  s.actors.push_back(ego);
  return s;
}

}  // namespace

TEST_CASE("expert completes an empty straight route with no infractions") {
  RoadMap map = mapgen::byId("straight");
  Route route = straightEvalRoute(3);
  ExpertDriver expert;
  EpisodeConfig ec;
  ec.seed = 3;
  ec.time_budget_s = 120.0;
  auto res = runEpisode(expert, map, route, ec);
  CHECK(res.termination == "finished");
  CHECK(res.score.route_completion >= 0.98);
  for (const auto& [k, v] : res.score.counts) CHECK(v == 0);
  CHECK(res.score.infraction_score == 1.0);
  CHECK(res.score.driving_score >= 0.98);
}

TEST_CASE("expert completes turn routes on the town map") {
  for (const std::string name : {"left", "right", "mixed"}) {
    EvalRoute er = buildEvalRoute(name, 5);
    RoadMap map = mapgen::byId(er.map_id);
    ExpertDriver expert;
    EpisodeConfig ec;
    ec.seed = 5;
    ec.time_budget_s = 180.0;
    auto res = runEpisode(expert, map, er.route, ec);
    INFO(name);
    CHECK(res.termination == "finished");
    CHECK(res.score.route_completion >= 0.95);
  }
}

TEST_CASE("motionless policy scores blocked with infraction score 1") {
  RoadMap map = mapgen::byId("straight");
  Route route = straightEvalRoute(4);
  ZeroDriver zero;
  EpisodeConfig ec;
  ec.seed = 4;
  ec.time_budget_s = 120.0;
  auto res = runEpisode(zero, map, route, ec);
  CHECK(res.termination == "blocked");
  CHECK(res.score.route_completion < 0.02);
  CHECK(res.score.counts.at("blocked") == 1);
  CHECK(res.score.infraction_score == 1.0);
  CHECK(res.score.driving_score < 0.02);
  CHECK(res.score.zero_distance);
}

TEST_CASE("throwing policy terminates as a policy error at current progress") {
  RoadMap map = mapgen::byId("straight");
  Route route = straightEvalRoute(6);
  CrashingDriver crash;
  EpisodeConfig ec;
  ec.seed = 6;
  auto res = runEpisode(crash, map, route, ec);
  CHECK(res.termination == "policy-error");
  CHECK(res.score.route_completion < 0.2);
}

TEST_CASE("same seed twice produces an identical episode log") {
  RoadMap map = mapgen::byId("straight");
  Route route = straightEvalRoute(7);
  auto run = [&] {
    ExpertDriver expert;
    EpisodeConfig ec;
    ec.seed = 7;
    ec.traffic = 3;
    ec.time_budget_s = 90.0;
    EpisodeLog log;
    runEpisode(expert, map, route, ec, &log);
    return log;
  };
  EpisodeLog a = run();
  EpisodeLog b = run();
  const fs::path da = fs::temp_directory_path() / "bevdrive_ep_a";
  const fs::path db = fs::temp_directory_path() / "bevdrive_ep_b";
  fs::remove_all(da);
  fs::remove_all(db);
  writeEpisodeLog(da, a);
  writeEpisodeLog(db, b);
  std::ifstream fa(da / "frames.bin", std::ios::binary);
  std::ifstream fb(db / "frames.bin", std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  REQUIRE(!ba.empty());
  CHECK(ba == bb);
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST_CASE("rescoring a stored log reproduces the score exactly") {
  RoadMap map = mapgen::byId("straight");
  Route route = straightEvalRoute(8);
  ExpertDriver expert;
  EpisodeConfig ec;
  ec.seed = 8;
  ec.traffic = 2;
  ec.time_budget_s = 90.0;
  EpisodeLog log;
  auto res = runEpisode(expert, map, route, ec, &log);

  const fs::path dir = fs::temp_directory_path() / "bevdrive_ep_rescore";
  fs::remove_all(dir);
  writeEpisodeLog(dir, log);
  EpisodeLog loaded = readEpisodeLog(dir);
  Route loaded_route = io::routeFromJson(loaded.meta.at("route"));
  auto rescored = scoreRoute(loaded.states(), map, loaded_route, ec.score);
  CHECK(rescored.route_completion == res.score.route_completion);
  CHECK(rescored.infraction_score == res.score.infraction_score);
  CHECK(rescored.driving_score == res.score.driving_score);
  CHECK(rescored.counts == res.score.counts);
  fs::remove_all(dir);
}

TEST_CASE("score arithmetic on crafted state sequences") {
  RoadMap map = mapgen::byId("straight");
  Rng rng(9);
  RouteParams rp;
  Route route = routeFromWalk(map, {0}, rng, rp);  // 200 m along y = -1.75

  SECTION("three quarters of the route gives completion 0.75") {
    std::vector<WorldState> states;
    const double length = route.length;
    for (int i = 0; i <= 100; ++i) {
      auto s = egoAt(-100.0 + 0.75 * length * i / 100.0, -1.75);
      s.time = i * 0.1;
      s.tick = i;
      states.push_back(s);
    }
    auto score = scoreRoute(states, map, route);
    CHECK(score.route_completion == Catch::Approx(0.75).margin(0.005));
  }

  SECTION("two vehicle collisions multiply to 0.36 and driving score follows") {
    std::vector<WorldState> states;
    for (int i = 0; i <= 400; ++i) {
      auto s = egoAt(-100.0 + 0.35 * i, -1.75, 0.0, 3.5);
      s.time = i * 0.1;
      s.tick = i;
      // Park an obstacle overlapping the ego twice, far apart in time.
      const bool contact = (i >= 100 && i < 110) || (i >= 300 && i < 310);
      if (contact) {
        ActorState other;
        other.id = 1;
        other.pose = s.actors[0].pose;
        states.push_back(s);
        states.back().actors.push_back(other);
      } else {
        states.push_back(s);
      }
    }
    auto score = scoreRoute(states, map, route);
    CHECK(score.counts.at("vehicle") == 2);
    CHECK(score.infraction_score == Catch::Approx(0.36));
    CHECK(score.driving_score ==
          Catch::Approx(score.route_completion * 0.36).margin(1e-12));
  }

  SECTION("motionless agent: infraction score 1, zero-distance flag") {
    std::vector<WorldState> states;
    for (int i = 0; i <= 700; ++i) {
      auto s = egoAt(-100.0, -1.75);
      s.time = i * 0.1;
      s.tick = i;
      states.push_back(s);
    }
    auto score = scoreRoute(states, map, route);
    CHECK(score.infraction_score == 1.0);
    CHECK(score.counts.at("blocked") == 1);
    CHECK(score.zero_distance);
    CHECK(score.per_km.at("blocked") == 1.0);  // raw count under the flag
  }

  SECTION("red light crossing counts once") {
    RoadMap lit = mapgen::byId("town3x3L");
    REQUIRE(!lit.lights.empty());
    Rng r2(10);
    // Find a light and drive straight through it while red.
    const TrafficLight& tl = lit.lights[0];
    Route route2;
    const Vec2 dir{std::cos(tl.approach_yaw), std::sin(tl.approach_yaw)};
    route2.path = Polyline({tl.position - dir * 30.0, tl.position + dir * 30.0});
    route2.length = route2.path.length();
    route2.goals = {tl.position + dir * 30.0};
    route2.segment_cmds = {Command::kFollowLane};
    route2.goal_s = {route2.length};
    std::vector<WorldState> states;
    for (int i = 0; i <= 120; ++i) {
      WorldState s;
      ActorState ego;
      ego.id = kEgoId;
      ego.pose = {tl.position + dir * (-20.0 + 0.35 * i), tl.approach_yaw};
      ego.speed = 3.5;
      s.actors.push_back(ego);
      s.time = i * 0.1;
      s.tick = i;
      s.lights = lit.lights;
      for (auto& l : s.lights) l.phase = LightPhase::kRed;
      states.push_back(s);
    }
    auto score = scoreRoute(states, lit, route2);
    CHECK(score.counts.at("red-light") == 1);
    CHECK(score.infraction_score == Catch::Approx(0.70));
  }

  SECTION("penalty monotonicity: an extra infraction never helps") {
    // Same trace with and without one collision window.
    auto mkStates = [&](bool with_hit) {
      std::vector<WorldState> states;
      for (int i = 0; i <= 300; ++i) {
        auto s = egoAt(-100.0 + 0.4 * i, -1.75, 0.0, 4.0);
        s.time = i * 0.1;
        s.tick = i;
        if (with_hit && i >= 150 && i < 160) {
          ActorState other;
          other.id = 1;
          other.pose = s.actors[0].pose;
          s.actors.push_back(other);
        }
        states.push_back(s);
      }
      return states;
    };
    auto clean = scoreRoute(mkStates(false), map, route);
    auto hit = scoreRoute(mkStates(true), map, route);
    CHECK(hit.infraction_score < clean.infraction_score);
    CHECK(hit.driving_score < clean.driving_score);
    CHECK(hit.driving_score <= hit.route_completion);
  }
}

TEST_CASE("matrix: 4 routes x 4 presets x 3 seeds yields 48 episodes") {
  MatrixOptions opt;
  opt.routes = {"straight", "left", "right", "mixed"};
  opt.presets = {"clean", "light", "medium", "heavy"};
  opt.seeds = {0, 1, 2};
  opt.time_budget_s = 170.0;
  MatrixEntry entry;
  entry.name = "expert";
  entry.driver = [](const NoisePreset&) { return std::make_unique<ExpertDriver>(); };
  auto report = runMatrix({entry}, opt);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].episodes == 48);
  // Column contract: DS, RC, IS plus per-type infractions per km.
  for (const std::string c : {"DS", "RC", "IS"}) CHECK(report.rows[0].mean.count(c) == 1);
  for (const auto& t : infractionTypes())
    CHECK(report.rows[0].mean.count(t + "/km") == 1);
}

TEST_CASE("matrix: shared seeds give zero std, missing checkpoints are skipped") {
  MatrixOptions opt;
  opt.routes = {"straight"};
  opt.presets = {"clean"};
  opt.seeds = {5, 5, 5};
  opt.time_budget_s = 120.0;
  MatrixEntry expert_entry;
  expert_entry.name = "expert";
  expert_entry.driver = [](const NoisePreset&) { return std::make_unique<ExpertDriver>(); };
  MatrixEntry missing;
  missing.name = "ghost";
  missing.checkpoint = "/nonexistent/checkpoint.ckpt";
  auto report = runMatrix({expert_entry, missing}, opt);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].stddev.at("DS") == 0.0);
  CHECK(report.rows[0].stddev.at("RC") == 0.0);
  CHECK(report.rows[1].skipped);

  const std::string table = formatReportTable(report);
  CHECK(table.find("expert") != std::string::npos);
  CHECK(table.find("skipped") != std::string::npos);
}
