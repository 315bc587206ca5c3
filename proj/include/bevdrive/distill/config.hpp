#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace bevdrive {

enum class TrainStage : int { kPerception = 0, kPrivileged = 1, kDistill = 2 };
enum class PerceptionRegime : int { kStaged = 0, kJoint = 1, kNone = 2 };

inline const char* regimeName(PerceptionRegime r) {
  switch (r) {
    case PerceptionRegime::kStaged: return "staged";
    case PerceptionRegime::kJoint: return "joint";
    case PerceptionRegime::kNone: return "none";
  }
  return "?";
}

inline PerceptionRegime regimeFromName(const std::string& s) {
  if (s == "staged") return PerceptionRegime::kStaged;
  if (s == "joint") return PerceptionRegime::kJoint;
  if (s == "none") return PerceptionRegime::kNone;
  throw std::invalid_argument("unknown regime: " + s);
}

/// Knobs for one training stage. Defaults follow the reference recipe:
/// range 15 m, K 5, privileged batch 512 / lr 3e-4, distill batch 32 / lr
/// 3e-4, loss weights 0.5 (others) and 0.1 (command).
struct TrainConfig {
  TrainStage stage = TrainStage::kPerception;
  PerceptionRegime regime = PerceptionRegime::kStaged;
  double vehicle_range = 15.0;
  int refine_iters = 5;
  int batch = 512;
  double lr = 3e-4;
  double lambda_other = 0.5;
  double lambda_cmd = 0.1;
  std::uint64_t seed = 0;
  int steps = 2000;
  double aux_perception_weight = 1.0;
  double theta_max = 3.141592653589793;  // rotation augmentation bound
  bool augment = true;
  int log_every = 25;

  static TrainConfig perceptionDefaults() {
    TrainConfig c;
    c.stage = TrainStage::kPerception;
    c.batch = 4;
    c.steps = 1500;
    return c;
  }
  static TrainConfig privilegedDefaults() {
    TrainConfig c;
    c.stage = TrainStage::kPrivileged;
    c.batch = 512;
    c.steps = 2000;
    return c;
  }
  static TrainConfig distillDefaults() {
    TrainConfig c;
    c.stage = TrainStage::kDistill;
    c.batch = 32;
    c.steps = 2000;
    return c;
  }

  nlohmann::json toJson() const {
    return {{"stage", static_cast<int>(stage)},
            {"regime", regimeName(regime)},
            {"vehicle_range", vehicle_range},
            {"refine_iters", refine_iters},
            {"batch", batch},
            {"lr", lr},
            {"lambda_other", lambda_other},
            {"lambda_cmd", lambda_cmd},
            {"seed", seed},
            {"steps", steps},
            {"aux_perception_weight", aux_perception_weight},
            {"theta_max", theta_max},
            {"augment", augment}};
  }
};

}  // namespace bevdrive
