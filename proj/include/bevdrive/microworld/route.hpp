#pragma once

#include "bevdrive/microworld/roadmap.hpp"

namespace bevdrive {

/// A navigation task: noisy GNSS goals with a per-segment high-level command,
/// plus the dense reference path used by the scripted expert and by scoring
/// (the learned agent only sees goals and commands).
struct Route {
  std::vector<Vec2> goals;             // noisy goal positions, world frame
  std::vector<Command> segment_cmds;   // command for the segment ending at goal i
  std::vector<double> goal_s;          // true arc length of each goal on the path
  double length = 0.0;
  Polyline path;
  double spacing_lo = 10.0, spacing_hi = 20.0;

  /// Segment index for a path arc length (first goal strictly ahead).
  int segmentIndex(double s) const {
    for (std::size_t i = 0; i < goal_s.size(); ++i)
      if (s < goal_s[i]) return static_cast<int>(i);
    return static_cast<int>(goals.size()) - 1;
  }

  Command commandAt(double s) const {
    const int i = segmentIndex(s);
    return i >= 0 ? segment_cmds[i] : Command::kFollowLane;
  }

  Vec2 goalAt(double s) const {
    const int i = segmentIndex(s);
    return i >= 0 ? goals[i] : (goals.empty() ? Vec2{} : goals.back());
  }
};

struct RouteParams {
  double min_length = 120.0;
  double max_length = 400.0;
  double scale_factor = 0.2;     // desk-scale shrink of the 50-100 m goal spacing
  double goal_spacing_lo = 50.0;
  double goal_spacing_hi = 100.0;
  double goal_noise_std = 1.0;   // scaled alongside the spacing
  double turn_approach = 10.0;   // command becomes the turn this far before entry
};

namespace route_detail {

struct CmdZone {
  double s0, s1;
  Command cmd;
};

}  // namespace route_detail

/// Random-walk a route over the lane graph. Commands per segment derive from
/// the map topology (intersection connections / lane changes crossed).
inline Route sampleRoute(const RoadMap& map, Rng& rng, const RouteParams& prm = {}) {
  if (map.lanes.empty()) throw std::invalid_argument("sample_route: map has no lanes");

  const double target_len = rng.uniform(prm.min_length, prm.max_length);
  const int start_lane = rng.uniformInt(0, static_cast<int>(map.lanes.size()) - 1);

  std::vector<Vec2> pts;
  std::vector<route_detail::CmdZone> zones;
  double acc = 0.0;

  auto appendLine = [&](const Polyline& line, double from_s) {
    const double step = 2.0;
    for (double s = from_s; s < line.length(); s += step) pts.push_back(line.sample(s));
    pts.push_back(line.sample(line.length()));
  };

  int lane = start_lane;
  double start_s = rng.uniform(0.0, std::max(0.5, map.lanes[lane].center.length() * 0.5));
  appendLine(map.lanes[lane].center, start_s);
  acc = Polyline(pts).length();
  int guard = 0;
  while (acc < target_len && ++guard < 64) {
    const auto outs = map.outgoing(lane);
    if (outs.empty()) break;
    const auto& conn = map.connections[outs[static_cast<std::size_t>(
        rng.uniformInt(0, static_cast<int>(outs.size()) - 1))]];
    const double entry_s = acc;
    appendLine(conn.path, 0.0);
    acc = Polyline(pts).length();
    if (conn.cmd != Command::kFollowLane)
      zones.push_back({entry_s - prm.turn_approach, acc, conn.cmd});
    lane = conn.to;
    appendLine(map.lanes[lane].center, 0.0);
    acc = Polyline(pts).length();
  }

  Route r;
  r.path = Polyline(pts);
  r.length = r.path.length();
  if (r.length < 1.0) throw std::runtime_error("sample_route: degenerate path");
  r.spacing_lo = prm.goal_spacing_lo * prm.scale_factor;
  r.spacing_hi = prm.goal_spacing_hi * prm.scale_factor;
  const double noise = prm.goal_noise_std * prm.scale_factor;

  double s = 0.0;
  while (true) {
    s += rng.uniform(r.spacing_lo, r.spacing_hi);
    const bool last = s >= r.length;
    if (last) s = r.length;
    r.goal_s.push_back(s);
    const Vec2 g = r.path.sample(s);
    r.goals.push_back({g.x + rng.normal(0.0, noise), g.y + rng.normal(0.0, noise)});
    if (last) break;
  }

  // Segment command: the first non-follow zone overlapping the segment.
  double prev = 0.0;
  for (std::size_t i = 0; i < r.goals.size(); ++i) {
    Command cmd = Command::kFollowLane;
    for (const auto& z : zones)
      if (z.s0 < r.goal_s[i] && z.s1 > prev) {
        cmd = z.cmd;
        break;
      }
    r.segment_cmds.push_back(cmd);
    prev = r.goal_s[i];
  }
  return r;
}

/// Deterministic route along an explicit lane/connection walk (evaluation
/// routes are constructed this way so the turn shape is controlled).
inline Route routeFromWalk(const RoadMap& map, const std::vector<int>& lane_walk,
                           Rng& rng, const RouteParams& prm = {}) {
  std::vector<Vec2> pts;
  std::vector<route_detail::CmdZone> zones;
  auto appendLine = [&](const Polyline& line) {
    const double step = 2.0;
    for (double s = 0.0; s < line.length(); s += step) pts.push_back(line.sample(s));
    pts.push_back(line.sample(line.length()));
  };
  for (std::size_t i = 0; i < lane_walk.size(); ++i) {
    const int lane = lane_walk[i];
    appendLine(map.lanes[lane].center);
    if (i + 1 < lane_walk.size()) {
      bool found = false;
      for (const auto& conn : map.connections) {
        if (conn.from == lane && conn.to == lane_walk[i + 1]) {
          const double entry_s = Polyline(pts).length();
          appendLine(conn.path);
          if (conn.cmd != Command::kFollowLane)
            zones.push_back({entry_s - prm.turn_approach, Polyline(pts).length(), conn.cmd});
          found = true;
          break;
        }
      }
      if (!found)
        throw std::invalid_argument("routeFromWalk: lanes not connected");
    }
  }
  Route r;
  r.path = Polyline(pts);
  r.length = r.path.length();
  r.spacing_lo = prm.goal_spacing_lo * prm.scale_factor;
  r.spacing_hi = prm.goal_spacing_hi * prm.scale_factor;
  const double noise = prm.goal_noise_std * prm.scale_factor;
  double s = 0.0;
  while (true) {
    s += rng.uniform(r.spacing_lo, r.spacing_hi);
    const bool last = s >= r.length;
    if (last) s = r.length;
    r.goal_s.push_back(s);
    const Vec2 g = r.path.sample(s);
    r.goals.push_back({g.x + rng.normal(0.0, noise), g.y + rng.normal(0.0, noise)});
    if (last) break;
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < r.goals.size(); ++i) {
    Command cmd = Command::kFollowLane;
    for (const auto& z : zones)
      if (z.s0 < r.goal_s[i] && z.s1 > prev) {
        cmd = z.cmd;
        break;
      }
    r.segment_cmds.push_back(cmd);
    prev = r.goal_s[i];
  }
  return r;
}

}  // namespace bevdrive
