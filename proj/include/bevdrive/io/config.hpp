#pragma once

#include <fstream>
#include <map>
#include <sstream>

#include "bevdrive/distill/config.hpp"
#include "bevdrive/harness/matrix.hpp"
#include "bevdrive/microworld/collect.hpp"

namespace bevdrive {

/// Flat key=value run configuration with registered defaults. Every knob of
/// the stack lives here so ablations are pure config diffs; unknown keys are
/// rejected. The full table is serialized into checkpoints and logs.
class RunConfig {
 public:
  RunConfig() { registerDefaults(); }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end())
      throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second = value;
  }

  void setKv(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void loadFile(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      try {
        setKv(t);
      } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " +
                                 e.what());
      }
    }
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }
  double num(const std::string& key) const { return std::stod(values_.at(key)); }
  int integer(const std::string& key) const { return std::stoi(values_.at(key)); }
  std::uint64_t uinteger(const std::string& key) const {
    return std::stoull(values_.at(key));
  }
  bool flag(const std::string& key) const {
    const std::string& v = values_.at(key);
    return v == "1" || v == "true" || v == "yes" || v == "on";
  }
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(values_.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }
  std::vector<std::uint64_t> seedList(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& s : list(key)) out.push_back(std::stoull(s));
    return out;
  }

  nlohmann::json toJson() const {
    nlohmann::json j;
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  std::string hashHex() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& [k, v] : values_) {
      for (char c : k + "=" + v + "\n") {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
      }
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }

  // Typed views -------------------------------------------------------------

  GridSpec grid() const {
    GridSpec g;
    g.x_min = num("grid.x_min");
    g.x_max = num("grid.x_max");
    g.y_min = num("grid.y_min");
    g.y_max = num("grid.y_max");
    g.pillar = num("grid.pillar");
    g.out_stride = integer("grid.out_stride");
    g.channels = integer("grid.channels");
    if (!g.valid()) throw std::invalid_argument("config: invalid grid spec");
    return g;
  }

  RouteParams routeParams() const {
    RouteParams r;
    r.min_length = num("route.min_length");
    r.max_length = num("route.max_length");
    r.scale_factor = num("route.scale_factor");
    r.goal_spacing_lo = num("route.spacing_lo");
    r.goal_spacing_hi = num("route.spacing_hi");
    r.goal_noise_std = num("route.noise_std");
    r.turn_approach = num("route.turn_approach");
    return r;
  }

  CollectConfig collectConfig() const {
    CollectConfig c;
    c.maps = list("collect.maps");
    c.frames_target = integer("collect.frames");
    c.seed = uinteger("seed");
    c.traffic = integer("collect.traffic");
    c.scenarios = flag("collect.scenarios");
    c.oracle_noise = num("collect.oracle_noise");
    c.lidar_dropout = num("collect.lidar_dropout");
    c.grid = grid();
    c.route = routeParams();
    c.max_ticks_per_episode = integer("collect.max_ticks");
    return c;
  }

  TrainConfig trainConfig(TrainStage stage) const {
    TrainConfig t;
    t.stage = stage;
    t.regime = regimeFromName(str("train.regime"));
    t.vehicle_range = num("train.vehicle_range");
    t.refine_iters = integer("train.refine_iters");
    t.lambda_other = num("train.lambda_other");
    t.lambda_cmd = num("train.lambda_cmd");
    t.seed = uinteger("seed");
    t.aux_perception_weight = num("train.distill.aux_weight");
    const std::string prefix = stage == TrainStage::kPerception ? "train.perception."
                               : stage == TrainStage::kPrivileged
                                   ? "train.privileged."
                                   : "train.distill.";
    t.batch = integer(prefix + "batch");
    t.steps = integer(prefix + "steps");
    t.lr = num(prefix + "lr");
    t.augment = flag("train.perception.augment");
    t.theta_max = num("train.perception.theta_max");
    return t;
  }

  PlannerConfig plannerConfig(int in_channels) const {
    PlannerConfig p;
    p.in_channels = in_channels;
    p.embed_dim = integer("planner.embed_dim");
    p.hidden = integer("planner.hidden");
    p.n_waypoints = integer("planner.n_waypoints");
    p.refine_iters = integer("train.refine_iters");
    p.roi.nx = integer("planner.roi_nx");
    p.roi.ny = integer("planner.roi_ny");
    p.roi.spacing = num("planner.roi_spacing");
    p.roi.x0 = num("planner.roi_x0");
    p.roi.y0 = num("planner.roi_y0");
    return p;
  }

  ControlConfig controlConfig() const {
    ControlConfig c;
    c.lat_kp = num("control.lat_kp");
    c.lat_ki = num("control.lat_ki");
    c.lat_kd = num("control.lat_kd");
    c.lon_kp = num("control.lon_kp");
    c.lon_ki = num("control.lon_ki");
    c.lon_kd = num("control.lon_kd");
    c.windup_clamp = num("control.windup");
    c.waypoint_dt = num("control.waypoint_dt");
    c.likelihood_threshold = num("control.likelihood_threshold");
    c.footprint_margin = num("control.footprint_margin");
    return c;
  }

  ScoreConfig scoreConfig() const {
    ScoreConfig s;
    s.penalty_vehicle = num("harness.penalty_vehicle");
    s.penalty_pedestrian = num("harness.penalty_pedestrian");
    s.penalty_layout = num("harness.penalty_layout");
    s.penalty_red_light = num("harness.penalty_red_light");
    s.blocked_window_s = num("harness.blocked_window");
    s.blocked_min_progress = num("harness.blocked_progress");
    return s;
  }

  MatrixOptions matrixOptions() const {
    MatrixOptions m;
    m.routes = list("harness.routes");
    m.presets = list("harness.presets");
    m.seeds = seedList("harness.seeds");
    m.traffic = integer("harness.traffic");
    m.time_budget_s = num("harness.time_budget");
    m.score = scoreConfig();
    m.det_threshold = num("perception.det_threshold");
    m.control = controlConfig();
    return m;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }

  void registerDefaults() {
    auto def = [&](const char* k, const char* v) { values_[k] = v; };
    def("seed", "0");

    def("world.dt", "0.1");

    def("grid.x_min", "-10");
    def("grid.x_max", "70");
    def("grid.y_min", "-40");
    def("grid.y_max", "40");
    def("grid.pillar", "0.5");
    def("grid.out_stride", "2");
    def("grid.channels", "64");

    def("route.min_length", "120");
    def("route.max_length", "400");
    def("route.scale_factor", "0.2");
    def("route.spacing_lo", "50");
    def("route.spacing_hi", "100");
    def("route.noise_std", "1.0");
    def("route.turn_approach", "10");

    def("collect.maps", "town3x3,straight,town3x3L,multilane");
    def("collect.frames", "20000");
    def("collect.traffic", "6");
    def("collect.scenarios", "true");
    def("collect.oracle_noise", "0.05");
    def("collect.lidar_dropout", "0.05");
    def("collect.max_ticks", "1500");

    def("train.regime", "staged");
    def("train.vehicle_range", "15");
    def("train.refine_iters", "5");
    def("train.lambda_other", "0.5");
    def("train.lambda_cmd", "0.1");
    def("train.perception.steps", "1500");
    def("train.perception.batch", "4");
    def("train.perception.lr", "3e-4");
    def("train.perception.augment", "true");
    def("train.perception.theta_max", "3.14159265358979");
    def("train.privileged.steps", "2000");
    def("train.privileged.batch", "512");
    def("train.privileged.lr", "3e-4");
    def("train.distill.steps", "2000");
    def("train.distill.batch", "32");
    def("train.distill.lr", "3e-4");
    def("train.distill.aux_weight", "1.0");
    def("train.brake.steps", "600");
    def("train.brake.lr", "1e-3");

    def("planner.embed_dim", "128");
    def("planner.hidden", "128");
    def("planner.n_waypoints", "10");
    def("planner.roi_nx", "24");
    def("planner.roi_ny", "12");
    def("planner.roi_spacing", "0.5");
    def("planner.roi_x0", "-2.0");
    def("planner.roi_y0", "-3.0");

    def("perception.det_threshold", "0.3");
    def("perception.pool_k", "3");

    def("control.lat_kp", "1.0");
    def("control.lat_ki", "0.5");
    def("control.lat_kd", "0.2");
    def("control.lon_kp", "5.0");
    def("control.lon_ki", "0.5");
    def("control.lon_kd", "1.0");
    def("control.windup", "5.0");
    def("control.waypoint_dt", "0.5");
    def("control.likelihood_threshold", "0.2");
    def("control.footprint_margin", "0.25");

    def("harness.penalty_vehicle", "0.60");
    def("harness.penalty_pedestrian", "0.50");
    def("harness.penalty_layout", "0.65");
    def("harness.penalty_red_light", "0.70");
    def("harness.blocked_window", "60");
    def("harness.blocked_progress", "1.0");
    def("harness.time_budget", "300");
    def("harness.routes", "straight,left,right,mixed");
    def("harness.presets", "clean");
    def("harness.seeds", "0,1,2");
    def("harness.traffic", "0");
  }

  std::map<std::string, std::string> values_;
};

}  // namespace bevdrive
