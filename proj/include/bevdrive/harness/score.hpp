#pragma once

#include <deque>
#include <map>

#include <nlohmann/json.hpp>

#include "bevdrive/microworld/route.hpp"
#include "bevdrive/microworld/world.hpp"

namespace bevdrive {

/// Multiplicative penalty factors and event thresholds. Blocked and offroad
/// carry no multiplicative penalty: blocked terminates the episode and
/// offroad discounts the completed distance instead.
struct ScoreConfig {
  double penalty_vehicle = 0.60;
  double penalty_pedestrian = 0.50;
  double penalty_layout = 0.65;
  double penalty_red_light = 0.70;
  double blocked_window_s = 60.0;
  double blocked_min_progress = 1.0;
  double collision_cooldown_s = 2.0;
  double route_done_margin = 1.5;
};

inline const std::vector<std::string>& infractionTypes() {
  static const std::vector<std::string> kTypes = {"vehicle",   "pedestrian", "layout",
                                                  "red-light", "offroad",    "blocked"};
  return kTypes;
}

struct EpisodeScore {
  double route_completion = 0.0;   // [0, 1], discounted by the offroad fraction
  double infraction_score = 1.0;   // product of penalty factors, (0, 1]
  double driving_score = 0.0;      // completion x infraction score
  double km = 0.0;
  std::map<std::string, int> counts;
  std::map<std::string, double> per_km;
  bool zero_distance = false;

  nlohmann::json toJson() const {
    return {{"route_completion", route_completion},
            {"infraction_score", infraction_score},
            {"driving_score", driving_score},
            {"km", km},
            {"counts", counts},
            {"per_km", per_km},
            {"zero_distance", zero_distance}};
  }
};

/// Streaming infraction detector; also drives episode termination (blocked).
/// Both the live episode loop and offline rescoring run this same class, so
/// a stored log reproduces its score exactly.
class InfractionTracker {
 public:
  InfractionTracker(const RoadMap* map, const Route* route, ScoreConfig cfg = {})
      : map_(map), route_(route), cfg_(cfg) {
    for (const auto& t : infractionTypes()) counts_[t] = 0;
  }

  void tick(const WorldState& state) {
    const ActorState* ego = state.find(kEgoId);
    if (!ego) return;
    const Vec2 pos = ego->pose.p;
    if (has_prev_) {
      const double step = (pos - prev_pos_).norm();
      distance_ += step;
      if (!map_->insideDrivable(pos)) {
        offroad_distance_ += step;
        if (!was_offroad_) bump("offroad");
        was_offroad_ = true;
      } else {
        was_offroad_ = false;
      }
    }

    const double s = route_->path.project(pos);
    max_progress_ = std::max(max_progress_, s);
    progress_window_.push_back({state.time, max_progress_});
    while (progress_window_.size() > 2 &&
           state.time - progress_window_.front().first > cfg_.blocked_window_s)
      progress_window_.pop_front();
    if (!blocked_ && state.time - progress_window_.front().first >=
                         cfg_.blocked_window_s - 1e-9 &&
        max_progress_ - progress_window_.front().second < cfg_.blocked_min_progress) {
      blocked_ = true;
      bump("blocked");
    }

    // Collisions with actors (edge-triggered with a per-actor cooldown).
    const OrientedRect ego_rect = ego->rect();
    for (const auto& a : state.actors) {
      if (a.id == kEgoId) continue;
      const bool hit = rectsOverlap(ego_rect, a.rect());
      auto& until = collision_clear_until_[a.id];
      if (hit && state.time >= until) {
        bump(a.cls == ActorClass::kVehicle ? "vehicle" : "pedestrian");
        until = state.time + cfg_.collision_cooldown_s;
      } else if (hit) {
        until = state.time + cfg_.collision_cooldown_s;
      }
    }

    // Layout collision: the ego rectangle crossing a road-edge wall.
    bool wall_hit = false;
    const auto corners = ego_rect.corners();
    for (const auto& w : map_->walls) {
      for (int e = 0; e < 4 && !wall_hit; ++e)
        wall_hit = segmentsIntersect({corners[e], corners[(e + 1) % 4]}, w);
      if (wall_hit) break;
    }
    if (wall_hit && !was_wall_) bump("layout");
    was_wall_ = wall_hit;

    // Red light violations: crossing an armed stop line on red.
    for (const auto& tl : state.lights) {
      if (std::abs(wrapAngle(tl.approach_yaw - ego->pose.yaw)) > 0.7) continue;
      const Vec2 dir{std::cos(tl.approach_yaw), std::sin(tl.approach_yaw)};
      const double proj = (pos - tl.position).dot(dir);
      const Vec2 nrm{-dir.y, dir.x};
      const double lat = std::abs((pos - tl.position).dot(nrm));
      auto& prev = light_proj_[tl.id];
      if (has_prev_ && prev < 0.0 && proj >= 0.0 && lat < 4.0 &&
          tl.phase == LightPhase::kRed)
        bump("red-light");
      prev = proj;
    }

    prev_pos_ = pos;
    has_prev_ = true;
  }

  bool blocked() const { return blocked_; }
  double maxProgress() const { return max_progress_; }
  double distance() const { return distance_; }

  EpisodeScore finish(const ScoreConfig& cfg) const {
    EpisodeScore s;
    s.counts = counts_;
    const double raw_completion =
        route_->length > 1e-9 ? std::clamp(max_progress_ / route_->length, 0.0, 1.0)
                              : 0.0;
    const double offroad_fraction =
        distance_ > 1e-9 ? offroad_distance_ / distance_ : 0.0;
    s.route_completion = raw_completion * (1.0 - offroad_fraction);
    s.infraction_score = std::pow(cfg.penalty_vehicle, counts_.at("vehicle")) *
                         std::pow(cfg.penalty_pedestrian, counts_.at("pedestrian")) *
                         std::pow(cfg.penalty_layout, counts_.at("layout")) *
                         std::pow(cfg.penalty_red_light, counts_.at("red-light"));
    s.driving_score = s.route_completion * s.infraction_score;
    s.km = distance_ / 1000.0;
    s.zero_distance = distance_ <= 1e-9;
    for (const auto& [k, v] : counts_)
      s.per_km[k] = s.zero_distance ? static_cast<double>(v) : v / s.km;
    return s;
  }

 private:
  void bump(const std::string& type) { counts_[type]++; }

  const RoadMap* map_;
  const Route* route_;
  ScoreConfig cfg_;
  std::map<std::string, int> counts_;
  std::map<int, double> collision_clear_until_;
  std::map<int, double> light_proj_;
  std::deque<std::pair<double, double>> progress_window_;
  Vec2 prev_pos_;
  bool has_prev_ = false;
  bool was_offroad_ = false;
  bool was_wall_ = false;
  bool blocked_ = false;
  double distance_ = 0.0;
  double offroad_distance_ = 0.0;
  double max_progress_ = 0.0;
};

/// Rescore a stored sequence of world states (pure function of the log).
inline EpisodeScore scoreRoute(const std::vector<WorldState>& states, const RoadMap& map,
                               const Route& route, const ScoreConfig& cfg = {}) {
  InfractionTracker tracker(&map, &route, cfg);
  for (const auto& s : states) tracker.tick(s);
  return tracker.finish(cfg);
}

}  // namespace bevdrive
