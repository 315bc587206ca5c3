#pragma once

#include <iomanip>
#include <sstream>

#include "bevdrive/microworld/oracle.hpp"
#include "bevdrive/microworld/sim.hpp"

namespace bevdrive {

struct CollectConfig {
  std::vector<std::string> maps = {"town3x3", "straight", "town3x3L", "multilane"};
  int frames_target = 20000;
  std::uint64_t seed = 0;
  int traffic = 6;
  bool scenarios = true;
  double oracle_noise = 0.05;
  double lidar_dropout = 0.05;
  GridSpec grid;
  RouteParams route;
  int max_ticks_per_episode = 1500;
};

struct CollectStats {
  int frames = 0;
  int episodes = 0;
  int dropped_offroad = 0;
};

/// Run expert-driven episodes across the map mix and write DrivingLog
/// directories until the frame target is reached.
inline CollectStats collectDataset(const std::filesystem::path& root,
                                   const CollectConfig& cfg,
                                   std::ostream* progress = nullptr) {
  std::filesystem::create_directories(root);
  CollectStats stats;
  Rng master(cfg.seed);

  while (stats.frames < cfg.frames_target) {
    const int ep = stats.episodes;
    const std::string map_id = cfg.maps[ep % cfg.maps.size()];
    RoadMap map = mapgen::byId(map_id);
    Rng ep_rng = master.child(1000 + ep);
    const std::uint64_t sim_seed = ep_rng.bits();

    Route route;
    try {
      route = sampleRoute(map, ep_rng, cfg.route);
    } catch (const std::exception&) {
      ++stats.episodes;
      continue;
    }

    WorldParams wp;
    Simulation sim(map, wp, sim_seed);
    sim.setEgo(route);
    sim.spawnTraffic(cfg.traffic);
    if (cfg.scenarios) {
      std::vector<ScenarioKind> kinds;
      const int n = ep_rng.uniformInt(1, 3);
      for (int i = 0; i < n; ++i)
        kinds.push_back(static_cast<ScenarioKind>(ep_rng.uniformInt(0, 3)));
      sim.scheduleScenarios(kinds);
    }

    std::ostringstream name;
    name << "ep_" << std::setw(6) << std::setfill('0') << ep;
    nlohmann::json meta = {{"seed", sim_seed},
                           {"map_id", map_id},
                           {"route", io::routeToJson(route)},
                           {"dt", wp.dt},
                           {"scale_factor", cfg.route.scale_factor},
                           {"grid", cfg.grid.toJson()},
                           {"oracle_noise", cfg.oracle_noise},
                           {"lidar_dropout", cfg.lidar_dropout},
                           {"kind", "driving_log"}};
    DrivingLogWriter writer(root / name.str(), meta);
    FutureFiller filler;
    Rng sensor_rng = ep_rng.child(7);

    LidarParams lp;
    lp.dropout = cfg.lidar_dropout;

    bool flagged = false;
    for (int tick = 0; tick < cfg.max_ticks_per_episode; ++tick) {
      const auto dec = sim.egoExpert();
      filler.recordStates(sim.state().tick, sim.state().actors);
      if (dec.offroad) {
        flagged = true;
        ++stats.dropped_offroad;
      } else {
        const ActorState* ego = sim.state().find(kEgoId);
        Frame f;
        f.tick = sim.state().tick;
        f.time = sim.state().time;
        PointCloud pc = lidarScan(sim.state(), sim.map(), lp, &sensor_rng);
        f.points = std::move(pc.points);
        f.point_scores = semanticOracle(pc.hits, cfg.oracle_noise, sensor_rng);
        f.actors = sim.state().actors;
        f.sem_rasters = renderSemRasters(sim.map(), ego->pose, cfg.grid);
        f.ego_cmd = route.commandAt(dec.path_s);
        f.ego_goal = ego->pose.toLocal(route.goalAt(dec.path_s));
        f.ego_speed = ego->speed;
        f.expert_action = dec.control;
        f.brake_label = dec.brake_label ? 1 : 0;
        f.priv_features = privilegedFeatures(sim.state());
        filler.push(std::move(f));
      }

      sim.step(dec.control);
      for (auto& done : filler.ready()) {
        writer.append(done);
        ++stats.frames;
      }
      const ActorState* ego = sim.state().find(kEgoId);
      if (dec.path_s >= route.length - 1.5 && ego && ego->speed < 0.2) break;
      if (stats.frames >= cfg.frames_target && tick > 100) break;
    }
    for (auto& done : filler.drain()) {
      writer.append(done);
      ++stats.frames;
    }
    writer.close();
    if (progress)
      (*progress) << "episode " << ep << " map=" << map_id
                  << " frames_total=" << stats.frames
                  << (flagged ? " (offroad frames dropped)" : "") << "\n";
    ++stats.episodes;
  }
  return stats;
}

}  // namespace bevdrive
