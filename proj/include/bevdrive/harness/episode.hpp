#pragma once

#include "bevdrive/harness/score.hpp"
#include "bevdrive/policy/agent.hpp"

namespace bevdrive {

struct EpisodeConfig {
  std::uint64_t seed = 0;
  double time_budget_s = 300.0;
  int traffic = 0;
  std::vector<ScenarioKind> scenarios;
  ScoreConfig score;
};

struct EpisodeResult {
  EpisodeScore score;
  int ticks = 0;
  std::string termination;  // finished | budget | blocked | policy-error
};

namespace io {

inline nlohmann::json lightToJson(const TrafficLight& l) {
  return {{"id", l.id},
          {"pos", {l.position.x, l.position.y}},
          {"yaw", l.approach_yaw},
          {"stop", {l.stop_line.a.x, l.stop_line.a.y, l.stop_line.b.x, l.stop_line.b.y}},
          {"group", l.group},
          {"phase", static_cast<int>(l.phase)}};
}

inline TrafficLight lightFromJson(const nlohmann::json& j) {
  TrafficLight l;
  l.id = j.at("id");
  l.position = {j.at("pos")[0], j.at("pos")[1]};
  l.approach_yaw = j.at("yaw");
  l.stop_line = {{j.at("stop")[0], j.at("stop")[1]}, {j.at("stop")[2], j.at("stop")[3]}};
  l.group = j.at("group");
  l.phase = static_cast<LightPhase>(j.at("phase").get<int>());
  return l;
}

inline nlohmann::json boxToJson(const OrientedBox& b) {
  return {{"pose", {b.pose.p.x, b.pose.p.y, b.pose.yaw}},
          {"extent", {b.extent.x, b.extent.y}},
          {"cls", static_cast<int>(b.cls)},
          {"score", b.score},
          {"is_ego", b.is_ego}};
}

inline OrientedBox boxFromJson(const nlohmann::json& j) {
  OrientedBox b;
  b.pose = {{j.at("pose")[0], j.at("pose")[1]}, j.at("pose")[2]};
  b.extent = {j.at("extent")[0], j.at("extent")[1]};
  b.cls = static_cast<ActorClass>(j.at("cls").get<int>());
  b.score = j.at("score");
  b.is_ego = j.at("is_ego");
  return b;
}

inline nlohmann::json planSetToJson(const PlanSet& p) {
  std::vector<float> flat;
  for (int c = 0; c < kNumCommands; ++c)
    for (const auto& w : p.trajectories[c]) {
      flat.push_back(static_cast<float>(w.x));
      flat.push_back(static_cast<float>(w.y));
    }
  return {{"traj", floatsBlob(flat)},
          {"likelihood", std::vector<double>(p.likelihood.begin(), p.likelihood.end())}};
}

inline PlanSet planSetFromJson(const nlohmann::json& j) {
  PlanSet p;
  const auto flat = floatsFromBlob(j.at("traj"));
  const int n = static_cast<int>(flat.size() / (2 * kNumCommands));
  std::size_t i = 0;
  for (int c = 0; c < kNumCommands; ++c)
    for (int t = 0; t < n; ++t) {
      p.trajectories[c].push_back({flat[i], flat[i + 1]});
      i += 2;
    }
  const auto lk = j.at("likelihood").get<std::vector<double>>();
  for (int c = 0; c < kNumCommands; ++c) p.likelihood[c] = lk[c];
  return p;
}

}  // namespace io

/// One tick of a stored episode: full world state plus the policy internals.
struct EpisodeTick {
  WorldState state;
  VehicleControl control;
  TickInternals internals;
};

struct EpisodeLog {
  nlohmann::json meta;
  std::vector<EpisodeTick> ticks;

  std::vector<WorldState> states() const {
    std::vector<WorldState> out;
    out.reserve(ticks.size());
    for (const auto& t : ticks) out.push_back(t.state);
    return out;
  }
};

namespace io {

inline nlohmann::json tickToJson(const EpisodeTick& t) {
  nlohmann::json actors = nlohmann::json::array();
  for (const auto& a : t.state.actors) actors.push_back(actorToJson(a));
  nlohmann::json lights = nlohmann::json::array();
  for (const auto& l : t.state.lights) lights.push_back(lightToJson(l));
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : t.internals.detections) dets.push_back(boxToJson(d));
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& p : t.internals.plans) plans.push_back(planSetToJson(p));
  std::vector<float> ego_plan;
  for (const auto& w : t.internals.ego_plan) {
    ego_plan.push_back(static_cast<float>(w.x));
    ego_plan.push_back(static_cast<float>(w.y));
  }
  return {{"tick", t.state.tick},
          {"time", t.state.time},
          {"actors", actors},
          {"lights", lights},
          {"control", {t.control.steer, t.control.throttle, t.control.brake}},
          {"detections", dets},
          {"plan_sets", plans},
          {"ego_plan", floatsBlob(ego_plan)},
          {"gate_stop", t.internals.gate_stop},
          {"brake_score", t.internals.brake_score},
          {"belief", {t.internals.belief.p.x, t.internals.belief.p.y,
                      t.internals.belief.yaw}}};
}

inline EpisodeTick tickFromJson(const nlohmann::json& j) {
  EpisodeTick t;
  t.state.tick = j.at("tick");
  t.state.time = j.at("time");
  for (const auto& a : j.at("actors")) t.state.actors.push_back(actorFromJson(a));
  for (const auto& l : j.at("lights")) t.state.lights.push_back(lightFromJson(l));
  t.control = {j.at("control")[0], j.at("control")[1], j.at("control")[2]};
  for (const auto& d : j.at("detections"))
    t.internals.detections.push_back(boxFromJson(d));
  for (const auto& p : j.at("plan_sets"))
    t.internals.plans.push_back(planSetFromJson(p));
  const auto ep = floatsFromBlob(j.at("ego_plan"));
  for (std::size_t i = 0; i + 1 < ep.size(); i += 2)
    t.internals.ego_plan.push_back({ep[i], ep[i + 1]});
  t.internals.gate_stop = j.at("gate_stop");
  t.internals.brake_score = j.at("brake_score");
  t.internals.belief = {{j.at("belief")[0], j.at("belief")[1]}, j.at("belief")[2]};
  return t;
}

}  // namespace io

inline void writeEpisodeLog(const std::filesystem::path& dir, const EpisodeLog& log) {
  std::filesystem::create_directories(dir);
  std::ofstream mf(dir / "meta.json");
  mf << log.meta.dump(2) << "\n";
  io::RecordWriter w(dir / "frames.bin");
  for (const auto& t : log.ticks) w.write(io::tickToJson(t));
}

inline EpisodeLog readEpisodeLog(const std::filesystem::path& dir) {
  EpisodeLog log;
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw std::runtime_error("episode log: missing meta.json");
  mf >> log.meta;
  io::RecordReader rd(dir / "frames.bin");
  while (auto j = rd.next()) log.ticks.push_back(io::tickFromJson(*j));
  return log;
}

/// Closed-loop episode: ticks the micro-world with the driver's actions
/// until route completion, budget expiry, or a terminal infraction. A
/// throwing policy scores as blocked at its current progress.
inline EpisodeResult runEpisode(EpisodeDriver& driver, const RoadMap& map,
                                const Route& route, const EpisodeConfig& cfg,
                                EpisodeLog* log_out = nullptr) {
  WorldParams wp;
  Simulation sim(map, wp, cfg.seed);
  sim.setEgo(route);
  sim.spawnTraffic(cfg.traffic);
  sim.scheduleScenarios(cfg.scenarios);
  driver.reset(cfg.seed);

  InfractionTracker tracker(&map, &route, cfg.score);
  EpisodeResult result;
  const int max_ticks = static_cast<int>(cfg.time_budget_s / wp.dt);
  std::string termination = "budget";

  for (int tick = 0; tick < max_ticks; ++tick) {
    TickInternals internals;
    VehicleControl control;
    try {
      control = driver.act(sim, route, &internals);
    } catch (const std::exception&) {
      termination = "policy-error";
      break;
    }
    if (log_out) log_out->ticks.push_back({sim.state(), control, internals});
    tracker.tick(sim.state());
    if (tracker.blocked()) {
      termination = "blocked";
      break;
    }
    const ActorState* ego = sim.state().find(kEgoId);
    const bool at_end = tracker.maxProgress() >= route.length - 0.5;
    const bool stopped_at_end =
        tracker.maxProgress() >= route.length - cfg.score.route_done_margin &&
        ego->speed < 0.5;
    if (at_end || stopped_at_end) {
      termination = "finished";
      break;
    }
    sim.step(control);
    result.ticks = tick + 1;
  }

  result.termination = termination;
  result.score = tracker.finish(cfg.score);
  if (log_out) {
    log_out->meta["seed"] = cfg.seed;
    log_out->meta["map_id"] = map.id;
    log_out->meta["route"] = io::routeToJson(route);
    log_out->meta["policy"] = driver.name();
    log_out->meta["termination"] = termination;
    log_out->meta["score"] = result.score.toJson();
    log_out->meta["kind"] = "episode_log";
  }
  return result;
}

}  // namespace bevdrive
