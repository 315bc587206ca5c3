#pragma once

#include "bevdrive/control/controller.hpp"
#include "bevdrive/distill/bundles.hpp"
#include "bevdrive/microworld/ekf.hpp"
#include "bevdrive/microworld/oracle.hpp"
#include "bevdrive/microworld/sim.hpp"

namespace bevdrive {

/// Sensor-noise preset ("weather" stand-in): lidar dropout, semantic oracle
/// noise, and localization noise.
struct NoisePreset {
  std::string name = "clean";
  double lidar_dropout = 0.0;
  double oracle_noise = 0.0;
  double gnss_std = 0.2;
  double imu_std = 0.005;
};

inline NoisePreset noisePreset(const std::string& name) {
  if (name == "clean") return {"clean", 0.0, 0.0, 0.2, 0.005};
  if (name == "light") return {"light", 0.05, 0.05, 0.4, 0.01};
  if (name == "medium") return {"medium", 0.10, 0.10, 0.7, 0.02};
  if (name == "heavy") return {"heavy", 0.20, 0.20, 1.0, 0.03};
  throw std::invalid_argument("unknown noise preset: " + name);
}

/// Per-tick policy internals recorded into episode logs.
struct TickInternals {
  std::vector<OrientedBox> detections;
  std::vector<PlanSet> plans;  // aligned with detections (vehicles only)
  std::vector<Vec2> ego_plan;  // refined, ego frame
  bool gate_stop = false;
  double brake_score = 0.0;
  Pose2 belief;
};

/// The brain driving an episode. Implementations read only their declared
/// sensor surface from the simulation.
class EpisodeDriver {
 public:
  virtual ~EpisodeDriver() = default;
  virtual void reset(std::uint64_t seed) = 0;
  virtual VehicleControl act(const Simulation& sim, const Route& route,
                             TickInternals* internals) = 0;
  virtual std::string name() const = 0;
};

/// Scripted expert wrapped as a driver (oracle runs and data sanity checks).
class ExpertDriver : public EpisodeDriver {
 public:
  void reset(std::uint64_t) override {}
  VehicleControl act(const Simulation& sim, const Route& route,
                     TickInternals* internals) override {
    auto dec = expertPolicy(sim.state(), sim.map(), kEgoId, route.path);
    if (internals) internals->belief = sim.state().find(kEgoId)->pose;
    return dec.control;
  }
  std::string name() const override { return "expert"; }
};

/// The distilled sensor-driven stack: EKF localization, pillar backbone,
/// detection decode, goal-conditioned refined planning, PID control with
/// brake override and multi-modal collision gating.
class StudentAgent : public EpisodeDriver {
 public:
  StudentAgent(StudentBundle bundle, NoisePreset noise, ControlConfig ctl = {},
               double det_threshold = 0.3, int refine_override = -1)
      : bundle_(std::move(bundle)),
        noise_(std::move(noise)),
        ctl_(ctl),
        det_threshold_(det_threshold) {
    refine_iters_ = refine_override >= 0 ? refine_override : bundle_.refine_iters;
    bundle_.perception.params().freeze();
    bundle_.planner.params().freeze();
  }

  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed ^ 0x5E4501ull);
    lat_pid_ = PidState(ctl_.lat_kp, ctl_.lat_ki, ctl_.lat_kd, ctl_.windup_clamp);
    lon_pid_ = PidState(ctl_.lon_kp, ctl_.lon_ki, ctl_.lon_kd, ctl_.windup_clamp);
    belief_ready_ = false;
    goal_index_ = 0;
  }

  std::string name() const override { return "student"; }

  VehicleControl act(const Simulation& sim, const Route& route,
                     TickInternals* internals) override {
    const WorldState& state = sim.state();
    const ActorState* ego = state.find(kEgoId);
    const double dt = sim.params().dt;

    // Sensor surface: lidar + semantic oracle, GNSS, IMU, speedometer,
    // and the privileged light/hazard features feeding the brake head.
    LidarParams lp;
    lp.dropout = noise_.lidar_dropout;
    PointCloud pc = lidarScan(state, sim.map(), lp, &rng_);
    Tensor<float> scores = semanticOracle(pc.hits, noise_.oracle_noise, rng_);
    const Vec2 gnss{ego->pose.p.x + rng_.normal(0.0, noise_.gnss_std),
                    ego->pose.p.y + rng_.normal(0.0, noise_.gnss_std)};
    const double imu_yaw = wrapAngle(ego->pose.yaw + rng_.normal(0.0, noise_.imu_std));
    const double speed = ego->speed;
    const std::vector<float> priv = privilegedFeatures(state);

    // Localization.
    if (!belief_ready_) {
      belief_ = PoseBelief{};
      belief_.mean << gnss.x, gnss.y, imu_yaw, speed;
      belief_.cov = Eigen::Matrix4d::Identity() * 1.0;
      belief_ready_ = true;
    } else {
      belief_ = ekfStep(belief_, gnss, imu_yaw, dt, ekf_params_);
    }
    const Pose2 believed = belief_.pose();

    // Navigation: nearest upcoming goal and its segment command.
    while (goal_index_ + 1 < static_cast<int>(route.goals.size()) &&
           (route.goals[goal_index_] - believed.p).norm() < goal_switch_radius_)
      ++goal_index_;
    const Command cmd = route.segment_cmds[goal_index_];
    const Vec2 goal_local = believed.toLocal(route.goals[goal_index_]);

    // Perception.
    const GridSpec& grid = bundle_.grid;
    auto pillars = pillarize(pointPaint(pc.points, scores), grid);
    auto f = bundle_.perception.features(pillars);
    auto heads = bundle_.perception.heads(f);
    auto maps = materializeHeadMaps(heads);
    auto detections = decodeDetections(maps, grid, det_threshold_);

    // Ego plan from the central crop at the anchor pose.
    const FeatureGeom geom = FeatureGeom::output(grid);
    Tensor<float> f3 = f.value().reshaped({grid.channels, geom.rows, geom.cols});
    Tensor<float> ego_roi =
        roiWarpValue(f3, geom, Pose2{{0, 0}, 0.0}, bundle_.planner.config().roi);
    RefinedPlan plan = bundle_.planner.plan(ego_roi, cmd, goal_local, refine_iters_);

    // Controls.
    VehicleControl control;
    control.steer = lateralControl(plan.trajectory, lat_pid_, dt, ctl_);
    auto [throttle, brake] = longitudinalControl(plan.trajectory, speed, lon_pid_, dt, ctl_);
    control.throttle = throttle;
    control.brake = brake;

    double brake_score = 0.0;
    if (bundle_.brake.trained()) {
      brake_score = bundle_.brake.score(priv);
      control = brakeOverride(control, brake_score);
    }

    // Multi-modal collision gate over detected vehicles.
    std::vector<GateParticipant> participants;
    std::vector<PlanSet> plan_sets;
    for (const auto& det : detections) {
      if (det.cls != ActorClass::kVehicle || det.is_ego) continue;
      if (!geom.contains(det.pose.p)) continue;
      GateParticipant gp;
      gp.detection = det;
      gp.plans = bundle_.planner.planSet(
          roiWarpValue(f3, geom, det.pose, bundle_.planner.config().roi));
      plan_sets.push_back(gp.plans);
      participants.push_back(std::move(gp));
    }
    const bool gate = collisionGate(plan.trajectory, ego_extent_, participants, ctl_);
    if (gate) control = hardStop(control);

    if (internals) {
      internals->detections = detections;
      internals->plans = plan_sets;
      internals->ego_plan = plan.trajectory;
      internals->gate_stop = gate;
      internals->brake_score = brake_score;
      internals->belief = believed;
    }
    return control;
  }

 private:
  StudentBundle bundle_;
  NoisePreset noise_;
  ControlConfig ctl_;
  double det_threshold_;
  int refine_iters_;
  EkfParams ekf_params_;
  Vec2 ego_extent_{2.25, 1.0};
  double goal_switch_radius_ = 4.0;

  Rng rng_;
  PidState lat_pid_, lon_pid_;
  PoseBelief belief_;
  bool belief_ready_ = false;
  int goal_index_ = 0;
};

}  // namespace bevdrive
