#pragma once

#include "bevdrive/microworld/recorder.hpp"

namespace bevdrive {

enum class ScenarioKind : int {
  kCrossingPedestrian = 0,
  kLaneChanger = 1,
  kLeadBrake = 2,
  kRedLightRunner = 3,
};

inline const char* scenarioName(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kCrossingPedestrian: return "crossing-pedestrian";
    case ScenarioKind::kLaneChanger: return "lane-changer";
    case ScenarioKind::kLeadBrake: return "lead-brake";
    case ScenarioKind::kRedLightRunner: return "red-light-runner";
  }
  return "?";
}

/// Closed world: owns the state, scripted drivers and walkers, scenario
/// triggers, and advances everything one tick at a time. The ego (id 0) is
/// the only externally controlled actor.
class Simulation {
 public:
  Simulation(RoadMap map, WorldParams prm, std::uint64_t seed)
      : map_(std::move(map)), prm_(prm), rng_(Rng(seed).child(17)) {
    state_.rng_seed = seed;
    state_.lights = map_.lights;
    for (auto& l : state_.lights) l.phase = lightPhaseAt(0.0, l.group, prm_);
  }

  const RoadMap& map() const { return map_; }
  const WorldState& state() const { return state_; }
  const WorldParams& params() const { return prm_; }
  const Route& egoRoute() const { return ego_route_; }

  void setEgo(const Route& route) {
    ego_route_ = route;
    ActorState ego;
    ego.id = kEgoId;
    ego.cls = ActorClass::kVehicle;
    const Vec2 p0 = route.path.sample(0.0);
    const Vec2 t0 = route.path.tangent(0.0);
    ego.pose = {p0, std::atan2(t0.y, t0.x)};
    ego.extent = {2.25, 1.0};
    state_.actors.insert(state_.actors.begin(), ego);
  }

  /// Background vehicles with random routes that respawn when finished.
  void spawnTraffic(int count) {
    for (int i = 0; i < count; ++i) {
      Route r = tryRandomRoute();
      if (r.path.empty()) continue;
      const Vec2 p = r.path.sample(0.0);
      if (!clear(p, 9.0)) continue;
      const Vec2 t = r.path.tangent(0.0);
      ActorState v;
      v.id = next_id_++;
      v.cls = ActorClass::kVehicle;
      v.pose = {p, std::atan2(t.y, t.x)};
      v.extent = {2.25, 1.0};
      state_.actors.push_back(v);
      Driver d;
      d.path = r.path;
      d.background = true;
      d.eprm.cruise_speed = rng_.uniform(3.5, 6.5);
      drivers_[v.id] = std::move(d);
    }
  }

  /// Queue scenario triggers at ego-route arc lengths.
  void scheduleScenarios(const std::vector<ScenarioKind>& kinds) {
    if (ego_route_.path.empty()) return;
    const double len = ego_route_.length;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      Trigger t;
      t.kind = kinds[i];
      t.at_s = len * (0.25 + 0.5 * (static_cast<double>(i) + rng_.uniform(0.0, 0.6)) /
                                 std::max<std::size_t>(1, kinds.size()));
      triggers_.push_back(t);
    }
  }

  void step(const VehicleControl& ego_control) {
    fireTriggers();
    std::map<int, VehicleControl> actions;
    if (state_.find(kEgoId)) actions[kEgoId] = ego_control;
    for (auto& [id, d] : drivers_) {
      if (!state_.find(id)) continue;
      ExpertParams ep = d.eprm;
      if (d.cruise_override >= 0.0 && state_.time < d.cruise_until)
        ep.cruise_speed = d.cruise_override;
      WorldState view = state_;
      if (d.ignore_lights) view.lights.clear();
      actions[id] = expertPolicy(view, map_, id, d.path, ep).control;
    }
    updateWalkers();
    state_ = stepWorld(state_, actions, prm_.dt, prm_);
    recycleActors();
  }

  /// The scripted expert decision for the ego on its route (data collection).
  ExpertDecision egoExpert() const {
    return expertPolicy(state_, map_, kEgoId, ego_route_.path);
  }

 private:
  struct Driver {
    Polyline path;
    ExpertParams eprm;
    bool background = false;
    bool despawn_at_end = false;
    bool ignore_lights = false;
    double cruise_override = -1.0;
    double cruise_until = 0.0;
  };
  struct Walker {
    Polyline path;
    double speed = 1.4;
  };
  struct Trigger {
    ScenarioKind kind;
    double at_s = 0.0;
    bool fired = false;
  };

  bool clear(const Vec2& p, double radius) const {
    for (const auto& a : state_.actors)
      if ((a.pose.p - p).norm() < radius) return false;
    return true;
  }

  Route tryRandomRoute() {
    for (int attempt = 0; attempt < 8; ++attempt) {
      try {
        RouteParams rp;
        rp.min_length = 150.0;
        rp.max_length = 400.0;
        return sampleRoute(map_, rng_, rp);
      } catch (const std::exception&) {
      }
    }
    return {};
  }

  void updateWalkers() {
    std::vector<int> done;
    for (auto& [id, w] : walkers_) {
      ActorState* a = state_.find(id);
      if (!a) continue;
      const double s = w.path.project(a->pose.p);
      if (s >= w.path.length() - 0.3) {
        done.push_back(id);
        continue;
      }
      const Vec2 target = w.path.sample(std::min(s + 1.0, w.path.length()));
      a->pose.yaw = std::atan2(target.y - a->pose.p.y, target.x - a->pose.p.x);
      a->speed = w.speed;
    }
    for (int id : done) removeActor(id);
  }

  void recycleActors() {
    std::vector<int> gone;
    for (auto& [id, d] : drivers_) {
      ActorState* a = state_.find(id);
      if (!a) continue;
      const double remain = d.path.length() - d.path.project(a->pose.p);
      if (remain > 3.0) continue;
      if (d.despawn_at_end) {
        gone.push_back(id);
      } else if (d.background) {
        Route r = tryRandomRoute();
        if (!r.path.empty() && clear(r.path.sample(0.0), 9.0)) {
          const Vec2 p = r.path.sample(0.0);
          const Vec2 t = r.path.tangent(0.0);
          a->pose = {p, std::atan2(t.y, t.x)};
          a->speed = 0.0;
          d.path = r.path;
        }
      }
    }
    for (int id : gone) removeActor(id);
  }

  void removeActor(int id) {
    drivers_.erase(id);
    walkers_.erase(id);
    for (auto it = state_.actors.begin(); it != state_.actors.end(); ++it)
      if (it->id == id) {
        state_.actors.erase(it);
        break;
      }
  }

  void fireTriggers() {
    const ActorState* ego = state_.find(kEgoId);
    if (!ego) return;
    const double s_ego = ego_route_.path.project(ego->pose.p);
    for (auto& t : triggers_) {
      if (t.fired || s_ego < t.at_s - 25.0) continue;
      t.fired = true;
      spawnScenario(t.kind, s_ego);
    }
  }

  void spawnScenario(ScenarioKind kind, double s_ego) {
    const double ahead = s_ego + 20.0;
    if (ahead >= ego_route_.length) return;
    const Vec2 p = ego_route_.path.sample(ahead);
    const Vec2 tan = ego_route_.path.tangent(ahead);
    const double yaw = std::atan2(tan.y, tan.x);
    const Vec2 nrm{-tan.y, tan.x};

    switch (kind) {
      case ScenarioKind::kCrossingPedestrian: {
        ActorState ped;
        ped.id = next_id_++;
        ped.cls = ActorClass::kPedestrian;
        ped.extent = {0.3, 0.3};
        const Vec2 start = p + nrm * 5.5;
        const Vec2 end = p - nrm * 5.5;
        ped.pose = {start, std::atan2(end.y - start.y, end.x - start.x)};
        ped.speed = 0.0;
        state_.actors.push_back(ped);
        walkers_[ped.id] = {Polyline({start, end}), rng_.uniform(1.1, 1.8)};
        break;
      }
      case ScenarioKind::kLeadBrake: {
        if (!clear(p, 6.0)) return;
        ActorState v;
        v.id = next_id_++;
        v.cls = ActorClass::kVehicle;
        v.pose = {p, yaw};
        v.speed = 4.0;
        state_.actors.push_back(v);
        Driver d;
        d.path = ego_route_.path;
        d.despawn_at_end = true;
        d.eprm.cruise_speed = 4.5;
        d.cruise_override = 0.0;  // slam the brakes shortly after spawning
        d.cruise_until = state_.time + rng_.uniform(2.5, 4.5);
        drivers_[v.id] = std::move(d);
        break;
      }
      case ScenarioKind::kLaneChanger: {
        // Cut in from the side ahead of the ego.
        const Vec2 start = p + nrm * 3.5;
        if (!clear(start, 5.0)) return;
        ActorState v;
        v.id = next_id_++;
        v.cls = ActorClass::kVehicle;
        v.pose = {start, yaw};
        v.speed = 3.0;
        state_.actors.push_back(v);
        std::vector<Vec2> merge;
        merge.push_back(start);
        for (double ds : {8.0, 16.0, 30.0, 60.0}) {
          const double s = std::min(ahead + ds, ego_route_.length);
          merge.push_back(ego_route_.path.sample(s));
        }
        Driver d;
        d.path = Polyline(merge);
        d.despawn_at_end = true;
        d.eprm.cruise_speed = 4.0;
        drivers_[v.id] = std::move(d);
        break;
      }
      case ScenarioKind::kRedLightRunner: {
        // Crossing traffic that ignores signals at the point ahead.
        const Vec2 start = p + nrm * 28.0;
        const Vec2 end = p - nrm * 28.0;
        if (!clear(start, 6.0)) return;
        ActorState v;
        v.id = next_id_++;
        v.cls = ActorClass::kVehicle;
        v.pose = {start, std::atan2(end.y - start.y, end.x - start.x)};
        v.speed = 7.0;
        state_.actors.push_back(v);
        Driver d;
        d.path = Polyline({start, end});
        d.despawn_at_end = true;
        d.ignore_lights = true;
        d.eprm.cruise_speed = 8.0;
        d.eprm.ttc_brake = 0.8;  // barely yields
        drivers_[v.id] = std::move(d);
        break;
      }
    }
  }

  RoadMap map_;
  WorldParams prm_;
  WorldState state_;
  Rng rng_;
  Route ego_route_;
  std::map<int, Driver> drivers_;
  std::map<int, Walker> walkers_;
  std::vector<Trigger> triggers_;
  int next_id_ = 1;
};

}  // namespace bevdrive
