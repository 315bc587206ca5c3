#pragma once

#include "bevdrive/core/tensor.hpp"
#include "bevdrive/microworld/world.hpp"

namespace bevdrive {

enum class HitKind : int { kVehicle = 0, kPedestrian = 1, kRoadBoundary = 2 };

struct LidarParams {
  int azimuth_steps = 360;
  int rings = 4;
  double max_range = 60.0;
  double dropout = 0.0;  // per-point drop probability (weather preset knob)
};

/// Planar multi-ring scan. Rays cast from the ego origin against actor
/// rectangles and road-edge walls; rings stagger azimuth and carry nominal
/// heights so the cloud keeps a density-versus-distance falloff.
struct PointCloud {
  Tensor<float> points;        // N x 4: x, y, z, intensity (ego frame)
  std::vector<HitKind> hits;   // per-point source attribution
};

inline PointCloud lidarScan(const WorldState& world, const RoadMap& map,
                            const LidarParams& prm = {}, Rng* dropout_rng = nullptr) {
  const ActorState* ego = world.find(kEgoId);
  if (!ego) throw std::invalid_argument("lidar_scan: no ego actor");
  const Vec2 origin = ego->pose.p;

  struct Hit {
    double range;
    HitKind kind;
  };

  std::vector<float> data;
  std::vector<HitKind> kinds;
  const double az_step = 2.0 * M_PI / prm.azimuth_steps;
  const double ring_heights[8] = {0.2, 0.6, 1.0, 1.4, 1.8, 2.2, 2.6, 3.0};

  for (int ring = 0; ring < prm.rings; ++ring) {
    const double ring_off = az_step * ring / prm.rings;
    const double z = ring_heights[ring % 8];
    for (int i = 0; i < prm.azimuth_steps; ++i) {
      const double az = i * az_step + ring_off;
      const Vec2 dir_world = Vec2{1, 0}.rotated(az + ego->pose.yaw);
      Hit best{prm.max_range, HitKind::kRoadBoundary};
      bool found = false;
      for (const auto& a : world.actors) {
        if (a.id == kEgoId) continue;
        auto t = rayRect(origin, dir_world, a.rect());
        if (t && *t < best.range) {
          best = {*t, a.cls == ActorClass::kVehicle ? HitKind::kVehicle
                                                    : HitKind::kPedestrian};
          found = true;
        }
      }
      for (const auto& wseg : map.walls) {
        auto t = raySegment(origin, dir_world, wseg);
        if (t && *t < best.range) {
          best = {*t, HitKind::kRoadBoundary};
          found = true;
        }
      }
      if (!found) continue;
      if (dropout_rng && prm.dropout > 0.0 && dropout_rng->bernoulli(prm.dropout))
        continue;
      // Hit point in the ego frame (+x forward).
      const Vec2 local = Vec2{best.range, 0.0}.rotated(az);
      data.push_back(static_cast<float>(local.x));
      data.push_back(static_cast<float>(local.y));
      data.push_back(static_cast<float>(z));
      data.push_back(1.0f);
      kinds.push_back(best.kind);
    }
  }

  PointCloud pc;
  const int n = static_cast<int>(kinds.size());
  pc.points = Tensor<float>({n, 4}, std::move(data));
  pc.hits = std::move(kinds);
  return pc;
}

}  // namespace bevdrive
