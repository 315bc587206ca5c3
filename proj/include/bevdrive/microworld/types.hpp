#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevdrive/geometry.hpp"

namespace bevdrive {

/// The six discrete maneuver intents conditioning the planner. Order is a
/// wire/checkpoint contract and must not change.
enum class Command : int {
  kTurnLeft = 0,
  kTurnRight = 1,
  kGoStraight = 2,
  kFollowLane = 3,
  kChangeLaneLeft = 4,
  kChangeLaneRight = 5,
};
inline constexpr int kNumCommands = 6;

inline const char* commandName(Command c) {
  switch (c) {
    case Command::kTurnLeft: return "turn-left";
    case Command::kTurnRight: return "turn-right";
    case Command::kGoStraight: return "go-straight";
    case Command::kFollowLane: return "follow-lane";
    case Command::kChangeLaneLeft: return "change-lane-to-left";
    case Command::kChangeLaneRight: return "change-lane-to-right";
  }
  return "?";
}

inline Command commandFromName(const std::string& s) {
  for (int i = 0; i < kNumCommands; ++i)
    if (s == commandName(static_cast<Command>(i))) return static_cast<Command>(i);
  throw std::invalid_argument("unknown command: " + s);
}

enum class ActorClass : int { kVehicle = 0, kPedestrian = 1 };

struct VehicleControl {
  double steer = 0.0;     // [-1, 1], positive steers left
  double throttle = 0.0;  // [0, 1]
  double brake = 0.0;     // [0, 1]

  bool finite() const {
    return std::isfinite(steer) && std::isfinite(throttle) && std::isfinite(brake);
  }
};

struct ActorState {
  int id = 0;
  ActorClass cls = ActorClass::kVehicle;
  Pose2 pose;
  double speed = 0.0;  // m/s, >= 0
  Vec2 extent{2.25, 1.0};  // half length, half width
  VehicleControl control;

  OrientedRect rect() const { return {pose, extent.x, extent.y}; }
};

enum class LightPhase : int { kGreen = 0, kYellow = 1, kRed = 2 };

struct TrafficLight {
  int id = 0;
  Vec2 position;       // stop line midpoint
  double approach_yaw = 0.0;  // heading of traffic governed by this light
  Segment stop_line;
  int group = 0;  // phase group within the intersection cycle
  LightPhase phase = LightPhase::kGreen;
};

/// Physics constants of the kinematic bicycle integrator.
struct WorldParams {
  double dt = 0.1;
  double max_steer_angle = 0.6;  // rad at |steer| = 1
  double max_accel = 3.0;        // m/s^2 at throttle 1
  double max_decel = 8.0;        // m/s^2 at brake 1
  double max_speed = 15.0;
  double light_green_s = 8.0;
  double light_yellow_s = 2.0;
  double light_red_s = 10.0;
};

struct WorldState {
  double time = 0.0;
  int tick = 0;
  std::vector<ActorState> actors;
  std::vector<TrafficLight> lights;
  std::uint64_t rng_seed = 0;

  const ActorState* find(int id) const {
    for (const auto& a : actors)
      if (a.id == id) return &a;
    return nullptr;
  }
  ActorState* find(int id) {
    for (auto& a : actors)
      if (a.id == id) return &a;
    return nullptr;
  }
};

inline constexpr int kEgoId = 0;

}  // namespace bevdrive
