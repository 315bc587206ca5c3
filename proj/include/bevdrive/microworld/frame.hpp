#pragma once

#include "bevdrive/io/container.hpp"
#include "bevdrive/microworld/route.hpp"
#include "bevdrive/perception/grid.hpp"

namespace bevdrive {

/// Packed binary raster at pillar resolution.
struct BitGrid {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> bits;

  void init(int r, int c) {
    rows = r;
    cols = c;
    bits.assign((static_cast<std::size_t>(r) * c + 7) / 8, 0);
  }
  void set(int r, int c, bool v = true) {
    const std::size_t i = static_cast<std::size_t>(r) * cols + c;
    if (v)
      bits[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    else
      bits[i >> 3] &= static_cast<std::uint8_t>(~(1u << (i & 7)));
  }
  bool at(int r, int c) const {
    const std::size_t i = static_cast<std::size_t>(r) * cols + c;
    return (bits[i >> 3] >> (i & 7)) & 1u;
  }

  nlohmann::json toJson() const {
    return {{"rows", rows}, {"cols", cols}, {"bits", nlohmann::json::binary(bits)}};
  }
  static BitGrid fromJson(const nlohmann::json& j) {
    BitGrid g;
    g.rows = j.at("rows");
    g.cols = j.at("cols");
    g.bits = j.at("bits").get_binary();
    return g;
  }
};

struct SemRasters {
  BitGrid road, solid, broken;
};

struct FutureTrack {
  int actor_id = 0;
  std::vector<Vec2> waypoints;  // world frame, fixed time spacing
  bool truncated = false;
};

/// Indices into the privileged feature vector handed to the brake classifier.
enum PrivFeature : int {
  kPfLightAhead = 0,
  kPfLightDist = 1,
  kPfLightRed = 2,
  kPfHazardAhead = 3,
  kPfHazardDist = 4,
  kPfLeadSpeed = 5,
  kPfEgoSpeed = 6,
  kPfTtc = 7,
};
inline constexpr int kNumPrivFeatures = 8;

/// One recorded tick: sensors, ground truth, navigation state and the
/// expert's action.
struct Frame {
  int tick = 0;
  double time = 0.0;
  Tensor<float> points;        // N x 4, ego frame
  Tensor<float> point_scores;  // N x 5
  std::vector<ActorState> actors;  // world frame; ego has id 0
  std::vector<FutureTrack> futures;
  SemRasters sem_rasters;
  Command ego_cmd = Command::kFollowLane;
  Vec2 ego_goal;  // ego frame
  double ego_speed = 0.0;
  VehicleControl expert_action;
  int brake_label = 0;
  std::vector<float> priv_features;

  const ActorState* ego() const {
    for (const auto& a : actors)
      if (a.id == kEgoId) return &a;
    return nullptr;
  }
  const FutureTrack* futureOf(int id) const {
    for (const auto& f : futures)
      if (f.actor_id == id) return &f;
    return nullptr;
  }
};

namespace io {

inline nlohmann::json actorToJson(const ActorState& a) {
  return {{"id", a.id},
          {"cls", static_cast<int>(a.cls)},
          {"pose", {a.pose.p.x, a.pose.p.y, a.pose.yaw}},
          {"speed", a.speed},
          {"extent", {a.extent.x, a.extent.y}},
          {"control", {a.control.steer, a.control.throttle, a.control.brake}}};
}

inline ActorState actorFromJson(const nlohmann::json& j) {
  ActorState a;
  a.id = j.at("id");
  a.cls = static_cast<ActorClass>(j.at("cls").get<int>());
  a.pose = {{j.at("pose")[0], j.at("pose")[1]}, j.at("pose")[2]};
  a.speed = j.at("speed");
  a.extent = {j.at("extent")[0], j.at("extent")[1]};
  a.control = {j.at("control")[0], j.at("control")[1], j.at("control")[2]};
  return a;
}

inline nlohmann::json frameToJson(const Frame& f) {
  nlohmann::json actors = nlohmann::json::array();
  for (const auto& a : f.actors) actors.push_back(actorToJson(a));
  nlohmann::json futures = nlohmann::json::array();
  for (const auto& t : f.futures) {
    std::vector<float> flat;
    flat.reserve(t.waypoints.size() * 2);
    for (const auto& w : t.waypoints) {
      flat.push_back(static_cast<float>(w.x));
      flat.push_back(static_cast<float>(w.y));
    }
    futures.push_back({{"actor_id", t.actor_id},
                       {"truncated", t.truncated},
                       {"waypoints", floatsBlob(flat)}});
  }
  return {{"tick", f.tick},
          {"time", f.time},
          {"points", tensorBlob(f.points)},
          {"point_scores", tensorBlob(f.point_scores)},
          {"actors", actors},
          {"futures", futures},
          {"sem_rasters",
           {{"road", f.sem_rasters.road.toJson()},
            {"solid", f.sem_rasters.solid.toJson()},
            {"broken", f.sem_rasters.broken.toJson()}}},
          {"ego_cmd", commandName(f.ego_cmd)},
          {"ego_goal", {f.ego_goal.x, f.ego_goal.y}},
          {"ego_speed", f.ego_speed},
          {"expert_action",
           {f.expert_action.steer, f.expert_action.throttle, f.expert_action.brake}},
          {"brake_label", f.brake_label},
          {"priv_features", floatsBlob(f.priv_features)}};
}

inline Frame frameFromJson(const nlohmann::json& j) {
  Frame f;
  f.tick = j.at("tick");
  f.time = j.at("time");
  f.points = tensorFromBlob(j.at("points"));
  f.point_scores = tensorFromBlob(j.at("point_scores"));
  for (const auto& a : j.at("actors")) f.actors.push_back(actorFromJson(a));
  for (const auto& t : j.at("futures")) {
    FutureTrack ft;
    ft.actor_id = t.at("actor_id");
    ft.truncated = t.at("truncated");
    const std::vector<float> flat = floatsFromBlob(t.at("waypoints"));
    for (std::size_t i = 0; i + 1 < flat.size(); i += 2)
      ft.waypoints.push_back({flat[i], flat[i + 1]});
    f.futures.push_back(std::move(ft));
  }
  f.sem_rasters.road = BitGrid::fromJson(j.at("sem_rasters").at("road"));
  f.sem_rasters.solid = BitGrid::fromJson(j.at("sem_rasters").at("solid"));
  f.sem_rasters.broken = BitGrid::fromJson(j.at("sem_rasters").at("broken"));
  f.ego_cmd = commandFromName(j.at("ego_cmd"));
  f.ego_goal = {j.at("ego_goal")[0], j.at("ego_goal")[1]};
  f.ego_speed = j.at("ego_speed");
  f.expert_action = {j.at("expert_action")[0], j.at("expert_action")[1],
                     j.at("expert_action")[2]};
  f.brake_label = j.at("brake_label");
  f.priv_features = floatsFromBlob(j.at("priv_features"));
  return f;
}

// Routes live in meta.json (text), so they use plain arrays, not blobs.
inline nlohmann::json routeToJson(const Route& r) {
  std::vector<double> goals, path;
  for (const auto& g : r.goals) {
    goals.push_back(g.x);
    goals.push_back(g.y);
  }
  for (const auto& p : r.path.points()) {
    path.push_back(p.x);
    path.push_back(p.y);
  }
  std::vector<std::string> cmds;
  for (auto c : r.segment_cmds) cmds.push_back(commandName(c));
  return {{"goals", goals},   {"segment_cmds", cmds},
          {"goal_s", r.goal_s}, {"length", r.length},
          {"path", path},     {"spacing_lo", r.spacing_lo},
          {"spacing_hi", r.spacing_hi}};
}

inline Route routeFromJson(const nlohmann::json& j) {
  Route r;
  const auto goals = j.at("goals").get<std::vector<double>>();
  for (std::size_t i = 0; i + 1 < goals.size(); i += 2)
    r.goals.push_back({goals[i], goals[i + 1]});
  for (const auto& c : j.at("segment_cmds"))
    r.segment_cmds.push_back(commandFromName(c));
  r.goal_s = j.at("goal_s").get<std::vector<double>>();
  r.length = j.at("length");
  const auto path = j.at("path").get<std::vector<double>>();
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i + 1 < path.size(); i += 2) pts.push_back({path[i], path[i + 1]});
  r.path = Polyline(pts);
  r.spacing_lo = j.at("spacing_lo");
  r.spacing_hi = j.at("spacing_hi");
  return r;
}

}  // namespace io
}  // namespace bevdrive
