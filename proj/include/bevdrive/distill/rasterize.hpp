#pragma once

#include "bevdrive/microworld/frame.hpp"
#include "bevdrive/perception/loss.hpp"

namespace bevdrive {

/// Channel layout of the privileged input grid.
enum GtChannel : int {
  kGtRoad = 0,
  kGtSolid = 1,
  kGtBroken = 2,
  kGtVehicle = 3,
  kGtPedestrian = 4,
  kGtSin = 5,
  kGtCos = 6,
};
inline constexpr int kGtChannels = 7;

/// Privileged input grid at pillar resolution: the ground-truth semantic
/// rasters stacked with rendered actor occupancy and orientation channels.
template <typename S>
Tensor<S> rasterizeGt(const Frame& frame, const GridSpec& grid) {
  const int H = grid.rows(), W = grid.cols();
  Tensor<S> out({kGtChannels, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (frame.sem_rasters.road.at(y, x)) out.at(kGtRoad, y, x) = S(1);
      if (frame.sem_rasters.solid.at(y, x)) out.at(kGtSolid, y, x) = S(1);
      if (frame.sem_rasters.broken.at(y, x)) out.at(kGtBroken, y, x) = S(1);
    }
  const ActorState* ego = frame.ego();
  if (!ego) return out;
  for (const auto& a : frame.actors) {
    const Pose2 local = ego->pose.toLocalPose(a.pose);
    const OrientedRect rect{local, a.extent.x, a.extent.y};
    // Cell bounding box of the footprint.
    const auto corners = rect.corners();
    double x_lo = 1e18, x_hi = -1e18, y_lo = 1e18, y_hi = -1e18;
    for (const auto& c : corners) {
      x_lo = std::min(x_lo, c.x);
      x_hi = std::max(x_hi, c.x);
      y_lo = std::min(y_lo, c.y);
      y_hi = std::max(y_hi, c.y);
    }
    const int c0 = std::max(0, grid.colOf(x_lo)), c1 = std::min(W - 1, grid.colOf(x_hi));
    const int r0 = std::max(0, grid.rowOf(y_lo)), r1 = std::min(H - 1, grid.rowOf(y_hi));
    const int occ = a.cls == ActorClass::kVehicle ? kGtVehicle : kGtPedestrian;
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        if (!rect.contains(grid.cellCenter(r, c))) continue;
        out.at(occ, r, c) = S(1);
        out.at(kGtSin, r, c) = static_cast<S>(std::sin(local.yaw));
        out.at(kGtCos, r, c) = static_cast<S>(std::cos(local.yaw));
      }
  }
  return out;
}

}  // namespace bevdrive
