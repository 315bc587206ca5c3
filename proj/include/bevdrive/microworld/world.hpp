#pragma once

#include <map>

#include "bevdrive/microworld/roadmap.hpp"
#include "bevdrive/microworld/route.hpp"

namespace bevdrive {

inline LightPhase lightPhaseAt(double time, int group, const WorldParams& p) {
  const double half = p.light_green_s + p.light_yellow_s;
  const double period = 2.0 * half;
  double t = std::fmod(time + group * half, period);
  if (t < 0) t += period;
  if (t < p.light_green_s) return LightPhase::kGreen;
  if (t < half) return LightPhase::kYellow;
  return LightPhase::kRed;
}

/// Advance the world by one tick under the given per-vehicle controls.
/// Pure function: identical inputs produce identical outputs. Pedestrians
/// advance along their current heading; traffic lights follow the fixed
/// phase schedule.
inline WorldState stepWorld(const WorldState& s,
                            const std::map<int, VehicleControl>& actions, double dt,
                            const WorldParams& p) {
  if (std::abs(dt - p.dt) > 1e-9)
    throw std::invalid_argument("step_world: dt does not match configured tick");
  for (const auto& [id, a] : actions) {
    if (!s.find(id)) throw std::invalid_argument("step_world: unknown actor id");
    if (!a.finite()) throw std::invalid_argument("step_world: non-finite action");
  }

  WorldState out = s;
  out.time = s.time + dt;
  out.tick = s.tick + 1;
  for (auto& a : out.actors) {
    if (a.cls == ActorClass::kVehicle) {
      const auto it = actions.find(a.id);
      if (it == actions.end())
        throw std::invalid_argument("step_world: vehicle without an action");
      a.control = it->second;
      const double steer_angle =
          std::clamp(a.control.steer, -1.0, 1.0) * p.max_steer_angle;
      const double accel = std::clamp(a.control.throttle, 0.0, 1.0) * p.max_accel -
                           std::clamp(a.control.brake, 0.0, 1.0) * p.max_decel;
      const double wheelbase = std::max(0.5, a.extent.x * 1.2);
      a.pose.p.x += a.speed * std::cos(a.pose.yaw) * dt;
      a.pose.p.y += a.speed * std::sin(a.pose.yaw) * dt;
      a.pose.yaw = wrapAngle(a.pose.yaw + a.speed / wheelbase * std::tan(steer_angle) * dt);
      a.speed = std::clamp(a.speed + accel * dt, 0.0, p.max_speed);
    } else {
      a.pose.p.x += a.speed * std::cos(a.pose.yaw) * dt;
      a.pose.p.y += a.speed * std::sin(a.pose.yaw) * dt;
    }
  }
  for (auto& l : out.lights) l.phase = lightPhaseAt(out.time, l.group, p);
  return out;
}

}  // namespace bevdrive
