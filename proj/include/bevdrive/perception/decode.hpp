#pragma once

#include "bevdrive/microworld/types.hpp"
#include "bevdrive/perception/net.hpp"

namespace bevdrive {

/// Planar detection: center, yaw, half extents, class, peak score.
struct OrientedBox {
  Pose2 pose;        // ego frame
  Vec2 extent{2.25, 1.0};
  ActorClass cls = ActorClass::kVehicle;
  double score = 0.0;
  bool is_ego = false;

  OrientedRect rect() const { return {pose, extent.x, extent.y}; }
};

namespace detail {

/// Peak cells: equal to their pool_k x pool_k max and above threshold
/// (max-pooling as simplified NMS).
template <typename S>
std::vector<std::pair<int, int>> heatmapPeaks(const Tensor<S>& map, double threshold,
                                              int pool_k) {
  const int H = map.dim(0), W = map.dim(1);
  const int r = pool_k / 2;
  std::vector<std::pair<int, int>> peaks;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const S v = map.at(y, x);
      if (static_cast<double>(v) <= threshold) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
          if (map.at(yy, xx) > v ||
              (map.at(yy, xx) == v && (yy < y || (yy == y && xx < x)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) peaks.push_back({y, x});
    }
  }
  return peaks;
}

}  // namespace detail

/// Read oriented boxes off the head maps. The detection containing the
/// grid's ego anchor cell (metric origin) is flagged as the ego.
template <typename S>
std::vector<OrientedBox> decodeDetections(const HeadMaps<S>& maps, const GridSpec& grid,
                                          double threshold = 0.3, int pool_k = 3) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("decode: threshold outside (0,1)");
  std::vector<OrientedBox> out;
  auto decodeClass = [&](const Tensor<S>& heat, ActorClass cls) {
    for (auto [y, x] : detail::heatmapPeaks(heat, threshold, pool_k)) {
      OrientedBox b;
      b.cls = cls;
      b.score = static_cast<double>(heat.at(y, x));
      const Vec2 c = grid.cellCenter(y, x);
      const double sin_v = static_cast<double>(maps.orientation.at(0, y, x));
      const double cos_v = static_cast<double>(maps.orientation.at(1, y, x));
      const double nrm = std::max(1e-6, std::hypot(sin_v, cos_v));
      b.pose = {c, std::atan2(sin_v / nrm, cos_v / nrm)};
      b.extent = {std::clamp(std::exp(static_cast<double>(maps.box.at(0, y, x))), 0.1, 8.0),
                  std::clamp(std::exp(static_cast<double>(maps.box.at(1, y, x))), 0.1, 4.0)};
      out.push_back(b);
    }
  };
  decodeClass(maps.centerness_vehicle, ActorClass::kVehicle);
  decodeClass(maps.centerness_pedestrian, ActorClass::kPedestrian);

  // Ego flag: the vehicle detection whose box contains the ego anchor.
  double best = 1e300;
  OrientedBox* ego = nullptr;
  for (auto& b : out) {
    if (b.cls != ActorClass::kVehicle) continue;
    if (b.rect().contains({0.0, 0.0})) {
      const double d = b.pose.p.norm();
      if (d < best) {
        best = d;
        ego = &b;
      }
    }
  }
  if (ego) ego->is_ego = true;
  return out;
}

}  // namespace bevdrive
