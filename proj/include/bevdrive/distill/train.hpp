#pragma once

#include <chrono>
#include <iostream>

#include "bevdrive/control/brake_net.hpp"
#include "bevdrive/distill/config.hpp"
#include "bevdrive/distill/dataset.hpp"
#include "bevdrive/perception/augment.hpp"
#include "bevdrive/planner/losses.hpp"

namespace bevdrive {

/// Line-delimited JSON metrics stream (step, loss terms, wall time).
class MetricsLogger {
 public:
  MetricsLogger() = default;
  explicit MetricsLogger(const std::filesystem::path& p) {
    if (!p.empty()) {
      std::filesystem::create_directories(p.parent_path());
      f_.open(p);
    }
    t0_ = std::chrono::steady_clock::now();
  }

  void log(int step, const std::map<std::string, double>& terms) {
    if (!f_.is_open()) return;
    nlohmann::json j;
    j["step"] = step;
    for (const auto& [k, v] : terms) j[k] = v;
    j["wall_ms"] = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0_)
                       .count();
    f_ << j.dump() << "\n";
    f_.flush();
  }

 private:
  std::ofstream f_;
  std::chrono::steady_clock::time_point t0_;
};

// ---------------------------------------------------------------------------
// Perception pre-training
// ---------------------------------------------------------------------------

template <typename S>
PerceptionLossOut<S> framePerceptionLoss(const PerceptionNet<S>& net, const Frame& frame,
                                         const ad::Var<S>& f) {
  auto heads = net.heads(f);
  auto det = splatDetectionTargets<S>(gtBoxesFromFrame(frame), net.grid());
  auto sem = semTargetsFromRasters<S>(frame.sem_rasters);
  return perceptionLoss(heads, det, sem);
}

struct PerceptionTrainStats {
  double first_loss = 0.0;
  double last_loss = 0.0;
};

/// Detection + mapping pre-training with rotation augmentation.
inline PerceptionTrainStats trainPerception(PerceptionNet<float>& net,
                                            const FrameDataset& ds,
                                            const TrainConfig& cfg,
                                            MetricsLogger* metrics = nullptr,
                                            std::ostream* progress = nullptr) {
  nn::Adam<float> opt(net.params(), cfg.lr);
  Rng rng(cfg.seed ^ 0xA11CE5ull);
  std::vector<int> order(ds.size());
  for (int i = 0; i < ds.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  PerceptionTrainStats stats;
  for (int step = 0; step < cfg.steps; ++step) {
    net.params().zeroGrad();
    ad::Var<float> total;
    double focal = 0, sem = 0, reg = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor >= order.size()) {
        cursor = 0;
        rng.shuffle(order.begin(), order.end());
      }
      Frame frame = ds.frames()[order[cursor++]];
      if (cfg.augment) {
        const double theta = rng.uniform(-cfg.theta_max, cfg.theta_max);
        frame = rotationAugment(frame, theta, net.grid());
      }
      auto pillars = pillarize(pointPaint(frame.points, frame.point_scores), net.grid());
      auto f = net.features(pillars);
      auto out = framePerceptionLoss(net, frame, f);
      focal += out.focal;
      sem += out.sem_bce;
      reg += out.l1_orient + out.l1_box;
      auto scaled = ad::scale(out.total, 1.0f / cfg.batch);
      total = total.defined() ? ad::add(total, scaled) : scaled;
    }
    const double loss = total.item();
    if (step == 0) stats.first_loss = loss;
    stats.last_loss = loss;
    total.backward();
    opt.step();
    if (metrics && step % cfg.log_every == 0)
      metrics->log(step, {{"loss", loss},
                          {"focal", focal / cfg.batch},
                          {"sem_bce", sem / cfg.batch},
                          {"reg_l1", reg / cfg.batch}});
    if (progress && step % 100 == 0)
      (*progress) << "perception step " << step << " loss " << loss << "\n";
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Privileged motion training
// ---------------------------------------------------------------------------

struct PlannerBatch {
  Tensor<float> rois;     // [B, Cin, ny, nx]
  Tensor<float> targets;  // [B, 2n]
  std::vector<int> ego_cmds;               // per row (0 when not ego)
  std::vector<float> ego_mask, other_mask;
  std::vector<int> ego_rows;
  Tensor<float> ego_goals;                 // [n_ego, 2]
  Tensor<float> ego_targets;               // [n_ego, 2n]
  int n_ego = 0, n_other = 0;
};

/// Assemble ground-truth ROIs for a set of vehicle samples. Rasterizes each
/// distinct frame once.
inline PlannerBatch buildPrivilegedBatch(const FrameDataset& ds,
                                         const std::vector<VehicleSample>& samples,
                                         const std::vector<int>& idx,
                                         const GridSpec& grid, const RoiSpec& roi) {
  PlannerBatch b;
  const int B = static_cast<int>(idx.size());
  b.rois = Tensor<float>({B, kGtChannels, roi.ny, roi.nx});
  b.targets = Tensor<float>({B, 2 * kNumWaypoints});
  b.ego_cmds.assign(B, 0);
  b.ego_mask.assign(B, 0.f);
  b.other_mask.assign(B, 0.f);

  const FeatureGeom geom = FeatureGeom::pillarLevel(grid);
  std::map<int, Tensor<float>> raster_cache;
  for (int r = 0; r < B; ++r) {
    const VehicleSample& s = samples[idx[r]];
    auto it = raster_cache.find(s.frame);
    if (it == raster_cache.end())
      it = raster_cache.emplace(s.frame, rasterizeGt<float>(ds.frames()[s.frame], grid))
               .first;
    Tensor<float> crop = roiWarpValue(it->second, geom, s.pose, roi);
    std::copy(crop.data(), crop.data() + crop.numel(),
              b.rois.data() + static_cast<std::int64_t>(r) * crop.numel());
    for (int c = 0; c < 2 * kNumWaypoints; ++c) b.targets.at(r, c) = s.target.at(0, c);
    if (s.is_ego) {
      b.ego_mask[r] = 1.f;
      b.ego_cmds[r] = s.ego_cmd;
      b.ego_rows.push_back(r);
      ++b.n_ego;
    } else {
      b.other_mask[r] = 1.f;
      ++b.n_other;
    }
  }
  b.ego_goals = Tensor<float>({b.n_ego, 2});
  b.ego_targets = Tensor<float>({b.n_ego, 2 * kNumWaypoints});
  for (int e = 0; e < b.n_ego; ++e) {
    const VehicleSample& s = samples[idx[b.ego_rows[e]]];
    b.ego_goals.at(e, 0) = static_cast<float>(s.goal.x);
    b.ego_goals.at(e, 1) = static_cast<float>(s.goal.y);
    for (int c = 0; c < 2 * kNumWaypoints; ++c)
      b.ego_targets.at(e, c) = s.target.at(0, c);
  }
  return b;
}

template <typename S>
struct MotionLossOut {
  ad::Var<S> total;
  double ego = 0, other = 0, cmd = 0, refine = 0;
  std::vector<int> argmin;
};

/// The joint motion objective: L_ego + lambda_other * L_other +
/// lambda_cmd * L_cmd + refinement (ego rows only, coarse input detached).
template <typename S>
MotionLossOut<S> motionLosses(const PlannerModel<S>& model, const PlannerBatch& batch,
                              const TrainConfig& cfg) {
  using namespace ad;
  MotionLossOut<S> out;
  Var<S> rois = Var<S>::constant(batch.rois.template cast<S>());
  Var<S> z = model.embed(rois);
  auto branches = model.decodeAll(z);
  const Tensor<S> targets = batch.targets.template cast<S>();
  Var<S> l1 = branchLossMatrix(branches, targets);

  std::vector<S> ego_mask(batch.ego_mask.begin(), batch.ego_mask.end());
  std::vector<S> other_mask(batch.other_mask.begin(), batch.other_mask.end());
  Var<S> ego = lossEgo(l1, batch.ego_cmds, ego_mask, batch.n_ego);
  Var<S> other = lossOther(l1, other_mask, std::max(1, batch.n_other), &out.argmin);

  // Pseudo labels: the known command for the ego, the argmin for the rest.
  std::vector<int> labels = out.argmin;
  for (int r = 0; r < static_cast<int>(labels.size()); ++r)
    if (batch.ego_mask[r] > 0.5f) labels[r] = batch.ego_cmds[r];
  std::vector<S> all_mask(labels.size(), S(1));
  Var<S> cmd = lossCmd(model.likelihoodLogits(z), labels, all_mask,
                       static_cast<int>(labels.size()));

  Var<S> total = add(add(ego, scale(other, S(cfg.lambda_other))),
                     scale(cmd, S(cfg.lambda_cmd)));

  if (batch.n_ego > 0 && cfg.refine_iters > 0) {
    Var<S> z_ego = gatherRows(z, batch.ego_rows);
    // Detached coarse trajectories: values of the labeled branch per row.
    TrajectorySteps<S> tau0;
    for (int t = 0; t < kNumWaypoints; ++t) {
      Tensor<S> step({batch.n_ego, 2});
      for (int e = 0; e < batch.n_ego; ++e) {
        const int row = batch.ego_rows[e];
        const auto& w = branches[batch.ego_cmds[row]][t].value();
        step.at(e, 0) = w.at(row, 0);
        step.at(e, 1) = w.at(row, 1);
      }
      tau0.push_back(Var<S>::constant(step));
    }
    Var<S> goals = Var<S>::constant(batch.ego_goals.template cast<S>());
    auto taus = model.refineRollout(z_ego, goals, tau0, cfg.refine_iters);
    std::vector<S> ones(batch.n_ego, S(1));
    Var<S> refine = lossRefine(taus, batch.ego_targets.template cast<S>(), ones,
                               batch.n_ego);
    out.refine = static_cast<double>(refine.item());
    total = add(total, refine);
  }

  out.ego = static_cast<double>(ego.item());
  out.other = static_cast<double>(other.item());
  out.cmd = static_cast<double>(cmd.item());
  out.total = total;
  return out;
}

struct PrivilegedTrainStats {
  double first_loss = 0.0, last_loss = 0.0;
  double last_ego = 0.0;
  std::array<int, kNumCommands> argmin_histogram{};
};

inline PrivilegedTrainStats trainPrivileged(PlannerModel<float>& teacher,
                                            const FrameDataset& ds,
                                            const GridSpec& grid,
                                            const TrainConfig& cfg,
                                            MetricsLogger* metrics = nullptr,
                                            std::ostream* progress = nullptr) {
  auto samples = ds.vehicleSamples(grid, cfg.vehicle_range);
  if (samples.empty()) throw std::runtime_error("train_privileged: no usable vehicles");
  nn::Adam<float> opt(teacher.params(), cfg.lr);
  Rng rng(cfg.seed ^ 0xBEEFull);
  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  PrivilegedTrainStats stats;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<int> idx;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor >= order.size()) {
        cursor = 0;
        rng.shuffle(order.begin(), order.end());
      }
      idx.push_back(order[cursor++]);
    }
    PlannerBatch batch = buildPrivilegedBatch(ds, samples, idx, grid, teacher.config().roi);
    if (batch.n_ego + batch.n_other == 0) {
      if (progress) (*progress) << "step " << step << ": batch skipped (no vehicles)\n";
      continue;
    }
    teacher.params().zeroGrad();
    auto out = motionLosses(teacher, batch, cfg);
    const double loss = out.total.item();
    if (step == 0) stats.first_loss = loss;
    stats.last_loss = loss;
    stats.last_ego = out.ego;
    for (std::size_t r = 0; r < out.argmin.size(); ++r)
      if (batch.other_mask[r] > 0.5f) stats.argmin_histogram[out.argmin[r]]++;
    out.total.backward();
    opt.step();
    if (metrics && step % cfg.log_every == 0)
      metrics->log(step, {{"loss", loss},
                          {"ego", out.ego},
                          {"other", out.other},
                          {"cmd", out.cmd},
                          {"refine", out.refine}});
    if (progress && step % 100 == 0)
      (*progress) << "privileged step " << step << " loss " << loss << " ego "
                  << out.ego << "\n";
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Student distillation
// ---------------------------------------------------------------------------

template <typename S>
struct DistillLossOut {
  ad::Var<S> total;
  double traj = 0, cmd_kl = 0, refine = 0, aux = 0;
  int matched = 0;
};

/// Distillation terms for one frame. The teacher runs frozen on the
/// ground-truth raster; the student plans from its own backbone features at
/// its own detected poses (the ego uses the central crop at the anchor).
template <typename S>
DistillLossOut<S> distillFrameLoss(const PerceptionNet<S>& perception,
                                   const PlannerModel<S>& student,
                                   const PlannerModel<S>& teacher, const Frame& frame,
                                   const TrainConfig& cfg, double det_threshold = 0.3) {
  using namespace ad;
  DistillLossOut<S> out;
  const GridSpec& grid = perception.grid();

  auto pillars = pillarize(pointPaint(frame.points.template cast<S>(),
                                      frame.point_scores.template cast<S>()),
                           grid);
  Var<S> f = perception.features(pillars);
  auto heads = perception.heads(f);

  Var<S> total;
  if (cfg.regime != PerceptionRegime::kNone) {
    auto det_targets = splatDetectionTargets<S>(gtBoxesFromFrame(frame), grid);
    auto sem_targets = semTargetsFromRasters<S>(frame.sem_rasters);
    auto aux = perceptionLoss(heads, det_targets, sem_targets);
    out.aux = static_cast<double>(aux.total.item());
    total = scale(aux.total, S(cfg.aux_perception_weight));
  }

  // Teacher inputs: gt raster ROIs at gt poses for in-range vehicles.
  const ActorState* ego = frame.ego();
  if (!ego) {
    out.total = total.defined() ? total : Var<S>::constant(Tensor<S>::scalar(S(0)));
    return out;
  }
  const FeatureGeom gt_geom = FeatureGeom::pillarLevel(grid);
  const FeatureGeom f_geom = FeatureGeom::output(grid);
  Tensor<S> gt_grid = rasterizeGt<S>(frame, grid);

  struct Pair {
    Pose2 student_pose;  // detection (ego: anchor)
    Pose2 teacher_pose;  // ground truth
    bool is_ego;
  };
  std::vector<Pair> pairs;
  pairs.push_back({{{0, 0}, 0.0}, {{0, 0}, 0.0}, true});

  // Detections for the student side.
  auto maps = materializeHeadMaps(heads);
  auto dets = decodeDetections(maps, grid, det_threshold);
  std::vector<Vec2> det_centers;
  std::vector<int> det_ids;
  for (int i = 0; i < static_cast<int>(dets.size()); ++i) {
    if (dets[i].cls != ActorClass::kVehicle || dets[i].is_ego) continue;
    det_centers.push_back(dets[i].pose.p);
    det_ids.push_back(i);
  }
  std::vector<Vec2> gt_centers;
  std::vector<Pose2> gt_poses;
  for (const auto& a : frame.actors) {
    if (a.id == kEgoId || a.cls != ActorClass::kVehicle) continue;
    if ((a.pose.p - ego->pose.p).norm() > cfg.vehicle_range) continue;
    const Pose2 local = ego->pose.toLocalPose(a.pose);
    if (!f_geom.contains(local.p) || !gt_geom.contains(local.p)) continue;
    gt_centers.push_back(local.p);
    gt_poses.push_back(local);
  }
  for (auto [di, gi] : matchByCenterDistance(det_centers, gt_centers, 2.0))
    pairs.push_back({dets[det_ids[di]].pose, gt_poses[gi], false});
  out.matched = static_cast<int>(pairs.size());

  // Teacher forward (values only; the teacher is frozen).
  const int B = static_cast<int>(pairs.size());
  Tensor<S> teacher_rois({B, kGtChannels, teacher.config().roi.ny, teacher.config().roi.nx});
  for (int r = 0; r < B; ++r) {
    Tensor<S> crop = roiWarpValue(gt_grid, gt_geom, pairs[r].teacher_pose,
                                  teacher.config().roi);
    std::copy(crop.data(), crop.data() + crop.numel(),
              teacher_rois.data() + static_cast<std::int64_t>(r) * crop.numel());
  }
  Var<S> tz = teacher.embed(Var<S>::constant(teacher_rois));
  auto t_branches = teacher.decodeAll(tz);
  Tensor<S> t_probs = softmaxRows(teacher.likelihoodLogits(tz)).value();

  // Student forward at its own poses, gradients through f.
  std::vector<Var<S>> student_rois;
  for (const auto& p : pairs) {
    Var<S> crop = roiWarp(reshape(f, {grid.channels, f_geom.rows, f_geom.cols}), f_geom,
                          p.student_pose, student.config().roi);
    student_rois.push_back(crop);
  }
  Var<S> stacked = reshape(concatChannels(student_rois),
                           {B, grid.channels, student.config().roi.ny,
                            student.config().roi.nx});
  Var<S> sz = student.embed(stacked);
  auto s_branches = student.decodeAll(sz);

  // All-command trajectory distillation.
  std::vector<S> ones(B, S(1));
  Var<S> traj;
  for (int c = 0; c < kNumCommands; ++c) {
    Tensor<S> target({B, 2 * kNumWaypoints});
    for (int r = 0; r < B; ++r)
      for (int t = 0; t < kNumWaypoints; ++t) {
        target.at(r, 2 * t) = t_branches[c][t].value().at(r, 0);
        target.at(r, 2 * t + 1) = t_branches[c][t].value().at(r, 1);
      }
    Var<S> term = maskedMean(trajectoryL1(s_branches[c], target), ones, B);
    traj = traj.defined() ? add(traj, term) : term;
  }
  traj = scale(traj, S(1.0 / kNumCommands));
  out.traj = static_cast<double>(traj.item());

  Var<S> kl = lossCmdDistill(student.likelihoodLogits(sz), t_probs, ones, B);
  out.cmd_kl = static_cast<double>(kl.item());

  Var<S> motion = add(traj, scale(kl, S(cfg.lambda_cmd)));

  // Ego refinement on the ground-truth future (goals exist for the ego only).
  const FutureTrack* ego_future = frame.futureOf(kEgoId);
  if (ego_future && !ego_future->truncated && cfg.refine_iters > 0) {
    Tensor<S> target({1, 2 * kNumWaypoints});
    for (int t = 0; t < kNumWaypoints; ++t) {
      const Vec2 local = ego->pose.toLocal(ego_future->waypoints[t]);
      target.at(0, 2 * t) = static_cast<S>(local.x);
      target.at(0, 2 * t + 1) = static_cast<S>(local.y);
    }
    Var<S> z_ego = gatherRows(sz, {0});
    const int ego_cmd = static_cast<int>(frame.ego_cmd);
    TrajectorySteps<S> tau0;
    for (int t = 0; t < kNumWaypoints; ++t) {
      Tensor<S> step({1, 2});
      step.at(0, 0) = s_branches[ego_cmd][t].value().at(0, 0);
      step.at(0, 1) = s_branches[ego_cmd][t].value().at(0, 1);
      tau0.push_back(Var<S>::constant(step));
    }
    Tensor<S> goal({1, 2});
    goal.at(0, 0) = static_cast<S>(frame.ego_goal.x);
    goal.at(0, 1) = static_cast<S>(frame.ego_goal.y);
    auto taus = student.refineRollout(z_ego, Var<S>::constant(goal), tau0,
                                      cfg.refine_iters);
    Var<S> refine = lossRefine(taus, target, {S(1)}, 1);
    out.refine = static_cast<double>(refine.item());
    motion = add(motion, refine);
  }

  total = total.defined() ? add(total, motion) : motion;
  out.total = total;
  return out;
}

struct DistillTrainStats {
  double first_loss = 0.0, last_loss = 0.0;
  double last_traj = 0.0;
};

inline DistillTrainStats distillStudent(PerceptionNet<float>& perception,
                                        PlannerModel<float>& student,
                                        const PlannerModel<float>& teacher,
                                        const FrameDataset& ds, const TrainConfig& cfg,
                                        MetricsLogger* metrics = nullptr,
                                        std::ostream* progress = nullptr) {
  nn::Adam<float> opt_p(perception.params(), cfg.lr);
  nn::Adam<float> opt_s(student.params(), cfg.lr);
  Rng rng(cfg.seed ^ 0xD15711ull);
  std::vector<int> order(ds.size());
  for (int i = 0; i < ds.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  DistillTrainStats stats;
  for (int step = 0; step < cfg.steps; ++step) {
    perception.params().zeroGrad();
    student.params().zeroGrad();
    ad::Var<float> total;
    double traj = 0, aux = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor >= order.size()) {
        cursor = 0;
        rng.shuffle(order.begin(), order.end());
      }
      const Frame& frame = ds.frames()[order[cursor++]];
      auto out = distillFrameLoss(perception, student, teacher, frame, cfg);
      traj += out.traj;
      aux += out.aux;
      auto scaled = ad::scale(out.total, 1.0f / cfg.batch);
      total = total.defined() ? ad::add(total, scaled) : scaled;
    }
    const double loss = total.item();
    if (step == 0) stats.first_loss = loss;
    stats.last_loss = loss;
    stats.last_traj = traj / cfg.batch;
    total.backward();
    opt_p.step();
    opt_s.step();
    if (metrics && step % cfg.log_every == 0)
      metrics->log(step, {{"loss", loss},
                          {"traj", traj / cfg.batch},
                          {"aux", aux / cfg.batch}});
    if (progress && step % 100 == 0)
      (*progress) << "distill step " << step << " loss " << loss << "\n";
  }
  return stats;
}

/// Brake classifier fit over every recorded frame.
inline double trainBrake(BrakeNet<float>& net, const FrameDataset& ds, int steps,
                         double lr = 1e-3) {
  const int n = ds.size();
  Tensor<float> feats({n, kNumPrivFeatures});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const Frame& f = ds.frames()[i];
    for (int c = 0; c < kNumPrivFeatures && c < static_cast<int>(f.priv_features.size());
         ++c)
      feats.at(i, c) = f.priv_features[c];
    labels[i] = f.brake_label;
  }
  return net.fit(feats, labels, steps, lr);
}

}  // namespace bevdrive
