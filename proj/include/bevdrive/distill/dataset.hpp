#pragma once

#include "bevdrive/distill/rasterize.hpp"
#include "bevdrive/microworld/recorder.hpp"
#include "bevdrive/planner/roi.hpp"

namespace bevdrive {

/// A plannable vehicle in one frame: ROI pose in the ego frame plus its
/// future trajectory transformed into the vehicle's own frame.
struct VehicleSample {
  int frame = 0;
  int actor_id = 0;
  bool is_ego = false;
  Pose2 pose;             // ego frame
  Tensor<float> target;   // [1, 2n] future in the vehicle's local frame
  int ego_cmd = 0;        // valid for the ego only
  Vec2 goal;              // ego-frame GNSS goal (ego only)
};

/// In-memory dataset over every frame of a log root.
class FrameDataset {
 public:
  void load(const std::filesystem::path& root) {
    for (const auto& ep : listEpisodes(root)) {
      DrivingLog log = readDrivingLog(ep);
      for (auto& f : log.frames) frames_.push_back(std::move(f));
    }
    if (frames_.empty())
      throw std::runtime_error("dataset: no frames under " + root.string());
  }

  void addFrames(std::vector<Frame> frames) {
    for (auto& f : frames) frames_.push_back(std::move(f));
  }

  const std::vector<Frame>& frames() const { return frames_; }
  int size() const { return static_cast<int>(frames_.size()); }

  /// Vehicles usable for motion training: the ego (with a complete future)
  /// and other vehicles with complete futures inside the range radius and
  /// the grid bounds. Range filtering happens here, at training time.
  std::vector<VehicleSample> vehicleSamples(const GridSpec& grid,
                                            double vehicle_range) const {
    std::vector<VehicleSample> out;
    const FeatureGeom geom = FeatureGeom::output(grid);
    for (int fi = 0; fi < size(); ++fi) {
      const Frame& f = frames_[fi];
      const ActorState* ego = f.ego();
      if (!ego) continue;
      for (const auto& a : f.actors) {
        if (a.cls != ActorClass::kVehicle) continue;
        const FutureTrack* track = f.futureOf(a.id);
        if (!track || track->truncated) continue;
        if (a.id != kEgoId &&
            (a.pose.p - ego->pose.p).norm() > vehicle_range)
          continue;
        VehicleSample s;
        s.frame = fi;
        s.actor_id = a.id;
        s.is_ego = a.id == kEgoId;
        s.pose = ego->pose.toLocalPose(a.pose);
        if (!geom.contains(s.pose.p)) continue;
        s.target = Tensor<float>({1, 2 * kNumWaypoints});
        for (int t = 0; t < kNumWaypoints; ++t) {
          const Vec2 local = a.pose.toLocal(track->waypoints[t]);
          s.target.at(0, 2 * t) = static_cast<float>(local.x);
          s.target.at(0, 2 * t + 1) = static_cast<float>(local.y);
        }
        s.ego_cmd = static_cast<int>(f.ego_cmd);
        s.goal = f.ego_goal;
        out.push_back(std::move(s));
      }
    }
    return out;
  }

 private:
  std::vector<Frame> frames_;
};

/// Hungarian assignment (padded square Jonker-Volgenant variant) between
/// detections and ground-truth boxes by center distance with a hard gate.
/// Returns pairs (det_index, gt_index).
inline std::vector<std::pair<int, int>> matchByCenterDistance(
    const std::vector<Vec2>& det_centers, const std::vector<Vec2>& gt_centers,
    double gate = 2.0) {
  const int na = static_cast<int>(det_centers.size());
  const int nb = static_cast<int>(gt_centers.size());
  if (na == 0 || nb == 0) return {};
  const int n = std::max(na, nb);
  const double kBig = 1e6;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, kBig));
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const double d = (det_centers[i] - gt_centers[j]).norm();
      cost[i][j] = d <= gate ? d : kBig;
    }

  // O(n^3) assignment with row/column potentials.
  std::vector<double> u(n + 1), v(n + 1);
  std::vector<int> p(n + 1), way(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, 1e18);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = 1e18;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<std::pair<int, int>> pairs;
  for (int j = 1; j <= n; ++j) {
    const int i = p[j];
    if (i >= 1 && i <= na && j <= nb && cost[i - 1][j - 1] < kBig)
      pairs.push_back({i - 1, j - 1});
  }
  return pairs;
}

}  // namespace bevdrive
