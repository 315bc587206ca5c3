#pragma once

#include <deque>
#include <filesystem>

#include "bevdrive/microworld/expert.hpp"
#include "bevdrive/microworld/frame.hpp"
#include "bevdrive/microworld/lidar.hpp"

namespace bevdrive {

inline constexpr int kFutureStride = 5;   // ticks between future waypoints (0.5 s)
inline constexpr int kNumWaypoints = 10;  // n

/// Sample the map's pre-rendered world bitmaps into ego-frame BEV rasters at
/// pillar resolution.
inline SemRasters renderSemRasters(const RoadMap& map, const Pose2& ego,
                                   const GridSpec& grid) {
  SemRasters out;
  out.road.init(grid.rows(), grid.cols());
  out.solid.init(grid.rows(), grid.cols());
  out.broken.init(grid.rows(), grid.cols());
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const Vec2 w = ego.toWorld(grid.cellCenter(r, c));
      if (map.roadBitmap().at(w.x, w.y)) out.road.set(r, c);
      if (map.solidBitmap().at(w.x, w.y)) out.solid.set(r, c);
      if (map.brokenBitmap().at(w.x, w.y)) out.broken.set(r, c);
    }
  }
  return out;
}

/// Privileged traffic-light / hazard summary for the brake classifier.
inline std::vector<float> privilegedFeatures(const WorldState& world,
                                             const ExpertParams& prm = {}) {
  std::vector<float> f(kNumPrivFeatures, 0.0f);
  const ActorState* ego = world.find(kEgoId);
  if (!ego) return f;
  f[kPfEgoSpeed] = static_cast<float>(ego->speed / 10.0);
  f[kPfLightDist] = 1.0f;
  f[kPfHazardDist] = 1.0f;
  f[kPfTtc] = 1.0f;

  for (const auto& tl : world.lights) {
    if (std::abs(wrapAngle(tl.approach_yaw - ego->pose.yaw)) > 0.6) continue;
    const Vec2 l = ego->pose.toLocal(tl.position);
    if (l.x < -1.0 || l.x > 30.0 || std::abs(l.y) > 4.0) continue;
    f[kPfLightAhead] = 1.0f;
    f[kPfLightDist] = static_cast<float>(std::clamp(l.x / 30.0, 0.0, 1.0));
    f[kPfLightRed] = tl.phase != LightPhase::kGreen ? 1.0f : 0.0f;
    break;
  }
  for (const auto& a : world.actors) {
    if (a.id == kEgoId) continue;
    const Vec2 l = ego->pose.toLocal(a.pose.p);
    const double reach = prm.corridor_length + ego->extent.x + a.extent.x;
    if (l.x < 0.0 || l.x > reach) continue;
    if (std::abs(l.y) > prm.corridor_halfwidth + a.extent.y) continue;
    const double gap = l.x - ego->extent.x - a.extent.x;
    const double closing = ego->speed - a.speed * std::cos(a.pose.yaw - ego->pose.yaw);
    const double ttc = closing > 0.1 ? gap / closing : 10.0;
    f[kPfHazardAhead] = 1.0f;
    f[kPfHazardDist] = static_cast<float>(std::clamp(gap / 30.0, 0.0, 1.0));
    f[kPfLeadSpeed] = static_cast<float>(a.speed / 10.0);
    f[kPfTtc] = static_cast<float>(std::clamp(ttc / 10.0, 0.0, 1.0));
    break;
  }
  return f;
}

/// Buffers frames until enough future ticks exist to fill every actor's
/// trajectory label, then releases them in order.
class FutureFiller {
 public:
  explicit FutureFiller(int stride = kFutureStride, int n = kNumWaypoints)
      : stride_(stride), n_(n) {}

  /// States are recorded every tick, even when the frame itself is dropped.
  void recordStates(int tick, const std::vector<ActorState>& actors) {
    states_.push_back({tick, actors});
  }

  void push(Frame frame) { pending_.push_back(std::move(frame)); }

  /// Frames whose horizon is fully inside the recorded history.
  std::vector<Frame> ready() {
    std::vector<Frame> out;
    while (!pending_.empty() && !states_.empty() &&
           pending_.front().tick + stride_ * n_ <= states_.back().tick) {
      out.push_back(finalize(std::move(pending_.front())));
      pending_.pop_front();
      trimHistory(out.back().tick);
    }
    return out;
  }

  /// Remaining frames at episode end; incomplete futures are truncated.
  std::vector<Frame> drain() {
    std::vector<Frame> out;
    while (!pending_.empty()) {
      out.push_back(finalize(std::move(pending_.front())));
      pending_.pop_front();
    }
    states_.clear();
    return out;
  }

 private:
  struct TickStates {
    int tick;
    std::vector<ActorState> actors;
  };

  const ActorState* lookup(int tick, int actor_id) const {
    for (const auto& ts : states_) {
      if (ts.tick != tick) continue;
      for (const auto& a : ts.actors)
        if (a.id == actor_id) return &a;
      return nullptr;
    }
    return nullptr;
  }

  Frame finalize(Frame f) {
    for (const auto& a : f.actors) {
      FutureTrack t;
      t.actor_id = a.id;
      for (int k = 1; k <= n_; ++k) {
        const ActorState* s = lookup(f.tick + k * stride_, a.id);
        if (!s) {
          t.truncated = true;
          break;
        }
        t.waypoints.push_back(s->pose.p);
      }
      if (static_cast<int>(t.waypoints.size()) < n_) t.truncated = true;
      f.futures.push_back(std::move(t));
    }
    return f;
  }

  void trimHistory(int released_tick) {
    while (!states_.empty() && states_.front().tick <= released_tick)
      states_.pop_front();
  }

  int stride_, n_;
  std::deque<TickStates> states_;
  std::deque<Frame> pending_;
};

/// On-disk episode directory: `meta.json` plus `frames.bin` (length-prefixed
/// CBOR records with the fixed frame field names).
class DrivingLogWriter {
 public:
  DrivingLogWriter(const std::filesystem::path& dir, const nlohmann::json& meta)
      : dir_(dir) {
    std::filesystem::create_directories(dir);
    std::ofstream mf(dir / "meta.json");
    if (!mf) throw std::runtime_error("driving log: cannot write meta");
    mf << meta.dump(2) << "\n";
    writer_ = std::make_unique<io::RecordWriter>(dir / "frames.bin");
  }

  void append(const Frame& f) {
    writer_->write(io::frameToJson(f));
    ++count_;
  }

  int count() const { return count_; }
  void close() { writer_->close(); }

 private:
  std::filesystem::path dir_;
  std::unique_ptr<io::RecordWriter> writer_;
  int count_ = 0;
};

struct DrivingLog {
  nlohmann::json meta;
  std::vector<Frame> frames;
};

inline DrivingLog readDrivingLog(const std::filesystem::path& dir) {
  DrivingLog log;
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw std::runtime_error("driving log: missing meta.json in " + dir.string());
  mf >> log.meta;
  io::RecordReader rd(dir / "frames.bin");
  while (auto j = rd.next()) log.frames.push_back(io::frameFromJson(*j));
  return log;
}

/// Episode directories under a dataset root, sorted by name.
inline std::vector<std::filesystem::path> listEpisodes(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> eps;
  if (!std::filesystem::exists(root)) return eps;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "meta.json"))
      eps.push_back(e.path());
  std::sort(eps.begin(), eps.end());
  return eps;
}

}  // namespace bevdrive
