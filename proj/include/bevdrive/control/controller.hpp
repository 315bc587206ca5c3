#pragma once

#include "bevdrive/control/pid.hpp"
#include "bevdrive/perception/decode.hpp"
#include "bevdrive/planner/model.hpp"

namespace bevdrive {

struct ControlConfig {
  double lat_kp = 1.0, lat_ki = 0.5, lat_kd = 0.2;    // latitudinal PID
  double lon_kp = 5.0, lon_ki = 0.5, lon_kd = 1.0;    // longitudinal PID
  double windup_clamp = 5.0;
  double waypoint_dt = 0.5;              // time spacing between plan waypoints
  double likelihood_threshold = 0.2;     // collision gate command filter
  double footprint_margin = 0.25;        // rectangle inflation for the gate
  int aim_index = 4;                     // the 5th waypoint
};

/// Steering from the heading error to the aim point (positive steers left).
inline double lateralControl(const std::vector<Vec2>& tau, PidState& pid, double dt,
                             const ControlConfig& cfg = {}) {
  if (static_cast<int>(tau.size()) <= cfg.aim_index)
    throw std::invalid_argument("lateral_control: plan shorter than the aim index");
  const Vec2 aim = tau[cfg.aim_index];
  if (aim.norm() < 1e-6) return 0.0;  // degenerate aim point
  const double error = std::atan2(aim.y, aim.x);
  return std::clamp(pid.update(error, dt), -1.0, 1.0);
}

/// Target speed from mean consecutive waypoint gaps over the waypoint period.
inline double targetSpeedFromPlan(const std::vector<Vec2>& tau, double waypoint_dt) {
  if (tau.size() < 2) throw std::invalid_argument("plan too short for a target speed");
  double gap_sum = 0.0;
  for (std::size_t k = 0; k + 1 < tau.size(); ++k) gap_sum += (tau[k + 1] - tau[k]).norm();
  return gap_sum / (static_cast<double>(tau.size() - 1) * waypoint_dt);
}

/// Throttle/brake from the speed error; positive PID output accelerates.
inline std::pair<double, double> longitudinalControl(const std::vector<Vec2>& tau,
                                                     double speed, PidState& pid,
                                                     double dt,
                                                     const ControlConfig& cfg = {}) {
  const double target = targetSpeedFromPlan(tau, cfg.waypoint_dt);
  const double out = pid.update(target - speed, dt);
  if (out >= 0.0) return {std::clamp(out, 0.0, 1.0), 0.0};
  return {0.0, std::clamp(-out, 0.0, 1.0)};
}

/// Brake score override: the network's score wins when it brakes harder.
inline VehicleControl brakeOverride(VehicleControl control, double brake_score) {
  control.brake = std::max(control.brake, brake_score);
  if (control.brake > 0.5) control.throttle = 0.0;
  return control;
}

/// A detected vehicle with its multi-modal plan for the collision gate.
struct GateParticipant {
  OrientedBox detection;  // ego frame
  PlanSet plans;          // trajectories in the vehicle's local frame
};

namespace detail {

inline double headingAt(const std::vector<Vec2>& traj, std::size_t k, double fallback) {
  const Vec2 d = k + 1 < traj.size() ? traj[k + 1] - traj[k]
                                     : (k > 0 ? traj[k] - traj[k - 1] : Vec2{});
  if (d.norm() < 1e-6) return fallback;
  return std::atan2(d.y, d.x);
}

}  // namespace detail

/// Check the ego plan against every sufficiently likely predicted plan of
/// every detected vehicle: oriented-rectangle overlap at each shared
/// timestep. Any overlap demands a hard stop.
inline bool collisionGate(const std::vector<Vec2>& ego_tau, const Vec2& ego_extent,
                          const std::vector<GateParticipant>& others,
                          const ControlConfig& cfg = {}) {
  for (const auto& o : others) {
    if (o.detection.is_ego) continue;
    for (int c = 0; c < kNumCommands; ++c) {
      if (o.plans.likelihood[c] <= cfg.likelihood_threshold) continue;
      const auto& their = o.plans.trajectories[c];
      const std::size_t steps = std::min(ego_tau.size(), their.size());
      for (std::size_t k = 0; k < steps; ++k) {
        OrientedRect ego_rect{{ego_tau[k], detail::headingAt(ego_tau, k, 0.0)},
                              ego_extent.x + cfg.footprint_margin,
                              ego_extent.y + cfg.footprint_margin};
        const Vec2 their_pos = o.detection.pose.toWorld(their[k]);
        const double their_yaw = wrapAngle(
            detail::headingAt(their, k, 0.0) + o.detection.pose.yaw);
        OrientedRect their_rect{{their_pos, their_yaw},
                                o.detection.extent.x + cfg.footprint_margin,
                                o.detection.extent.y + cfg.footprint_margin};
        if (rectsOverlap(ego_rect, their_rect)) return true;
      }
    }
  }
  return false;
}

/// Hard stop: hold the steering, cut throttle, full brake.
inline VehicleControl hardStop(const VehicleControl& current) {
  return {current.steer, 0.0, 1.0};
}

}  // namespace bevdrive
