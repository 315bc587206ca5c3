#pragma once

#include "bevdrive/microworld/frame.hpp"

namespace bevdrive {

namespace detail {

inline BitGrid rotateBitGrid(const BitGrid& in, double theta, const GridSpec& grid) {
  BitGrid out;
  out.init(in.rows, in.cols);
  const double c = std::cos(-theta), s = std::sin(-theta);
  for (int r = 0; r < in.rows; ++r) {
    for (int col = 0; col < in.cols; ++col) {
      const Vec2 p = grid.cellCenter(r, col);
      const Vec2 src{c * p.x - s * p.y, s * p.x + c * p.y};
      if (!grid.inRange(src.x, src.y)) continue;
      if (in.at(grid.rowOf(src.y), grid.colOf(src.x))) out.set(r, col);
    }
  }
  return out;
}

}  // namespace detail

/// Rotate an entire frame about the ego by theta: points, actor boxes,
/// future trajectories, the goal, and the rasters all turn together, so
/// label consistency is preserved.
inline Frame rotationAugment(const Frame& frame, double theta, const GridSpec& grid) {
  Frame out = frame;
  const ActorState* ego = frame.ego();
  if (!ego) return out;
  const Pose2 ego_pose = ego->pose;

  const double c = std::cos(theta), s = std::sin(theta);
  const int n_points = out.points.rank() == 2 ? out.points.dim(0) : 0;
  for (int i = 0; i < n_points; ++i) {
    const double x = out.points.at(i, 0), y = out.points.at(i, 1);
    out.points.at(i, 0) = static_cast<float>(c * x - s * y);
    out.points.at(i, 1) = static_cast<float>(s * x + c * y);
  }

  auto rotateWorldPoint = [&](const Vec2& w) {
    return ego_pose.toWorld(ego_pose.toLocal(w).rotated(theta));
  };
  // The ego is the sensor frame and stays fixed; everything else rotates
  // about it.
  for (auto& a : out.actors) {
    if (a.id == kEgoId) continue;
    Pose2 local = ego_pose.toLocalPose(a.pose);
    local.p = local.p.rotated(theta);
    local.yaw = wrapAngle(local.yaw + theta);
    a.pose = ego_pose.toWorldPose(local);
  }
  for (auto& t : out.futures)
    for (auto& w : t.waypoints) w = rotateWorldPoint(w);

  out.ego_goal = frame.ego_goal.rotated(theta);

  out.sem_rasters.road = detail::rotateBitGrid(frame.sem_rasters.road, theta, grid);
  out.sem_rasters.solid = detail::rotateBitGrid(frame.sem_rasters.solid, theta, grid);
  out.sem_rasters.broken = detail::rotateBitGrid(frame.sem_rasters.broken, theta, grid);
  return out;
}

}  // namespace bevdrive
