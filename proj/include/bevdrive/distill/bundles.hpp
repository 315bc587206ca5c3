#pragma once

#include "bevdrive/control/brake_net.hpp"
#include "bevdrive/distill/train.hpp"

namespace bevdrive {

/// Checkpoint kinds and the tensor-name prefixes inside bundles.
inline constexpr const char* kPerceptionPrefix = "perception.";
inline constexpr const char* kPlannerPrefix = "planner.";
inline constexpr const char* kBrakePrefix = "brake.";

inline nlohmann::json commandOrderJson() {
  nlohmann::json arr = nlohmann::json::array();
  for (int c = 0; c < kNumCommands; ++c) arr.push_back(commandName(static_cast<Command>(c)));
  return arr;
}

inline void verifyCommandOrder(const nlohmann::json& meta) {
  if (!meta.contains("command_order")) return;
  const auto& arr = meta.at("command_order");
  for (int c = 0; c < kNumCommands; ++c)
    if (arr.at(c).get<std::string>() != commandName(static_cast<Command>(c)))
      throw std::runtime_error("checkpoint: command ordering mismatch");
}

inline void verifyGrid(const nlohmann::json& meta, const GridSpec& expect) {
  const GridSpec got = GridSpec::fromJson(meta.at("grid"));
  if (!(got == expect))
    throw std::runtime_error("checkpoint: grid spec mismatch");
}

inline void savePerceptionCheckpoint(const std::filesystem::path& path,
                                     const PerceptionNet<float>& net,
                                     const nlohmann::json& extra = {}) {
  Checkpoint ck;
  ck.meta = {{"kind", "perception"}, {"grid", net.grid().toJson()}};
  if (!extra.is_null())
    for (auto& [k, v] : extra.items()) ck.meta[k] = v;
  storeParams(ck, net.params(), kPerceptionPrefix);
  ck.save(path.string());
}

inline PerceptionNet<float> loadPerceptionNet(const Checkpoint& ck) {
  if (ck.meta.at("kind") != "perception" && ck.meta.at("kind") != "student")
    throw std::runtime_error("checkpoint: not a perception checkpoint");
  const GridSpec grid = GridSpec::fromJson(ck.meta.at("grid"));
  PerceptionNet<float> net(grid, 0);
  loadParams(ck, net.params(), kPerceptionPrefix);
  return net;
}

inline void saveTeacherCheckpoint(const std::filesystem::path& path,
                                  const PlannerModel<float>& teacher,
                                  const GridSpec& grid, const nlohmann::json& extra = {}) {
  Checkpoint ck;
  ck.meta = {{"kind", "planner_teacher"},
             {"grid", grid.toJson()},
             {"planner", teacher.config().toJson()},
             {"n_waypoints", teacher.config().n_waypoints},
             {"refine_iters", teacher.config().refine_iters},
             {"command_order", commandOrderJson()}};
  if (!extra.is_null())
    for (auto& [k, v] : extra.items()) ck.meta[k] = v;
  storeParams(ck, teacher.params(), kPlannerPrefix);
  ck.save(path.string());
}

inline PlannerModel<float> loadPlanner(const Checkpoint& ck) {
  verifyCommandOrder(ck.meta);
  const PlannerConfig cfg = PlannerConfig::fromJson(ck.meta.at("planner"));
  PlannerModel<float> model(cfg, 0);
  loadParams(ck, model.params(), kPlannerPrefix);
  return model;
}

/// Full driveable student: perception + planner + brake classifier.
inline void saveStudentBundle(const std::filesystem::path& path,
                              const PerceptionNet<float>& perception,
                              const PlannerModel<float>& planner,
                              const BrakeNet<float>& brake,
                              const nlohmann::json& extra = {}) {
  Checkpoint ck;
  ck.meta = {{"kind", "student"},
             {"grid", perception.grid().toJson()},
             {"planner", planner.config().toJson()},
             {"refine_iters", planner.config().refine_iters},
             {"command_order", commandOrderJson()},
             {"brake_trained", brake.trained()}};
  if (!extra.is_null())
    for (auto& [k, v] : extra.items()) ck.meta[k] = v;
  storeParams(ck, perception.params(), kPerceptionPrefix);
  storeParams(ck, planner.params(), kPlannerPrefix);
  storeParams(ck, brake.params(), kBrakePrefix);
  ck.save(path.string());
}

struct StudentBundle {
  PerceptionNet<float> perception;
  PlannerModel<float> planner;
  BrakeNet<float> brake;
  GridSpec grid;
  int refine_iters = 5;
  nlohmann::json meta;
};

inline StudentBundle loadStudentBundle(const std::filesystem::path& path) {
  Checkpoint ck = Checkpoint::load(path.string());
  if (ck.meta.at("kind") != "student")
    throw std::runtime_error("checkpoint: not a student bundle: " + path.string());
  verifyCommandOrder(ck.meta);
  StudentBundle b;
  b.grid = GridSpec::fromJson(ck.meta.at("grid"));
  b.perception = PerceptionNet<float>(b.grid, 0);
  loadParams(ck, b.perception.params(), kPerceptionPrefix);
  b.planner = PlannerModel<float>(PlannerConfig::fromJson(ck.meta.at("planner")), 0);
  loadParams(ck, b.planner.params(), kPlannerPrefix);
  b.brake = BrakeNet<float>(0);
  loadParams(ck, b.brake.params(), kBrakePrefix);
  if (ck.meta.value("brake_trained", false)) b.brake.markTrained();
  b.refine_iters = ck.meta.at("refine_iters");
  b.meta = ck.meta;
  return b;
}

}  // namespace bevdrive
