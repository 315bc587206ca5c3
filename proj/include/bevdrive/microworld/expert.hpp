#pragma once

#include "bevdrive/microworld/world.hpp"

namespace bevdrive {

struct ExpertParams {
  double cruise_speed = 6.0;
  double turn_speed = 3.5;
  double lookahead_base = 3.0;
  double lookahead_gain = 0.7;
  double corridor_length = 14.0;   // hazard scan ahead
  double corridor_halfwidth = 1.7;
  double ttc_brake = 2.5;          // s
  double gap_stop = 5.5;           // m bumper gap that forces a stop
  double light_stop_dist = 12.0;   // start braking for a red this far out
  double stop_margin = 2.2;        // target standstill point before the line
  double kp_throttle = 0.55;
  double kp_brake = 0.45;
};

struct ExpertDecision {
  VehicleControl control;
  bool brake_label = false;  // braking caused by a light or hazard
  bool offroad = false;
  double path_s = 0.0;
};

/// Scripted pure-pursuit driver with time-to-collision braking and red-light
/// stops. Used for data collection and as the brain of background traffic.
inline ExpertDecision expertPolicy(const WorldState& world, const RoadMap& map,
                                   int actor_id, const Polyline& path,
                                   const ExpertParams& prm = {}) {
  ExpertDecision out;
  const ActorState* me = world.find(actor_id);
  if (!me) throw std::invalid_argument("expert: unknown actor");
  out.offroad = !map.insideDrivable(me->pose.p);

  const double s_me = path.project(me->pose.p);
  out.path_s = s_me;

  // Pure pursuit on the route path.
  const double ld = std::max(prm.lookahead_base, prm.lookahead_gain * me->speed);
  const Vec2 target = path.sample(std::min(s_me + ld, path.length()));
  const Vec2 local = me->pose.toLocal(target);
  const double alpha = std::atan2(local.y, std::max(0.3, local.x));
  const double wheelbase = std::max(0.5, me->extent.x * 1.2);
  const double steer_angle = std::atan2(2.0 * wheelbase * std::sin(alpha), ld);
  out.control.steer = std::clamp(steer_angle / 0.6, -1.0, 1.0);

  // Base target speed, reduced in curves and near the route end.
  double target_v = prm.cruise_speed;
  const Vec2 t0 = path.tangent(std::min(s_me + 2.0, path.length()));
  const Vec2 t1 = path.tangent(std::min(s_me + 8.0, path.length()));
  if (std::abs(wrapAngle(std::atan2(t1.y, t1.x) - std::atan2(t0.y, t0.x))) > 0.15)
    target_v = std::min(target_v, prm.turn_speed);
  const double remain = path.length() - s_me;
  if (remain < 12.0) target_v = std::min(target_v, std::max(0.0, (remain - 0.5) * 0.8));

  bool caution = false;     // a light or hazard lowered the target speed
  bool forced_stop = false; // a light or hazard demands standing still

  // Leading vehicles / pedestrians in the corridor ahead.
  for (const auto& a : world.actors) {
    if (a.id == actor_id) continue;
    const Vec2 l = me->pose.toLocal(a.pose.p);
    const double reach = prm.corridor_length + me->extent.x + a.extent.x;
    if (l.x < me->extent.x * 0.5 || l.x > reach) continue;
    if (std::abs(l.y) > prm.corridor_halfwidth + a.extent.y) continue;
    const double gap = l.x - me->extent.x - a.extent.x;
    const double closing = me->speed - a.speed * std::cos(a.pose.yaw - me->pose.yaw);
    const double ttc = closing > 0.1 ? gap / closing : 1e9;
    if (gap < prm.gap_stop || ttc < prm.ttc_brake) {
      caution = true;
      forced_stop = true;
      target_v = 0.0;
    } else if (gap < 2.0 * prm.gap_stop && a.speed < target_v) {
      caution = true;
      target_v = std::max(0.0, a.speed);
    }
  }

  // Red or yellow light governing our approach.
  for (const auto& tl : world.lights) {
    if (tl.phase == LightPhase::kGreen) continue;
    if (std::abs(wrapAngle(tl.approach_yaw - me->pose.yaw)) > 0.6) continue;
    const Vec2 l = me->pose.toLocal(tl.position);
    if (l.x < -1.0 || l.x > prm.light_stop_dist || std::abs(l.y) > 4.0) continue;
    const double dist = l.x - prm.stop_margin;
    caution = true;
    if (dist <= 0.5) {
      forced_stop = true;
      target_v = 0.0;
    } else {
      target_v = std::min(target_v, 0.8 * dist);
    }
    break;
  }

  const double err = target_v - me->speed;
  if (err >= 0.0) {
    out.control.throttle = std::clamp(prm.kp_throttle * err, 0.0, 1.0);
    out.control.brake = 0.0;
  } else {
    out.control.throttle = 0.0;
    out.control.brake = std::clamp(-prm.kp_brake * err, 0.0, 1.0);
  }
  if (forced_stop && me->speed < 1.0) {
    out.control.throttle = 0.0;
    out.control.brake = std::max(out.control.brake, 0.5);
  }
  out.brake_label = caution && out.control.brake > 0.05;
  return out;
}

}  // namespace bevdrive
