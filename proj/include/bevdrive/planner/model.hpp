#pragma once

#include <array>

#include "bevdrive/core/checkpoint.hpp"
#include "bevdrive/microworld/types.hpp"
#include "bevdrive/planner/roi.hpp"

namespace bevdrive {

struct PlannerConfig {
  int in_channels = 64;   // ROI channel count (backbone C, or gt raster depth)
  int embed_dim = 128;
  int hidden = 128;
  int n_waypoints = 10;
  int refine_iters = 5;   // K
  RoiSpec roi;

  nlohmann::json toJson() const {
    return {{"in_channels", in_channels}, {"embed_dim", embed_dim},
            {"hidden", hidden},           {"n_waypoints", n_waypoints},
            {"refine_iters", refine_iters}, {"roi", roi.toJson()}};
  }
  static PlannerConfig fromJson(const nlohmann::json& j) {
    PlannerConfig c;
    c.in_channels = j.at("in_channels");
    c.embed_dim = j.at("embed_dim");
    c.hidden = j.at("hidden");
    c.n_waypoints = j.at("n_waypoints");
    c.refine_iters = j.at("refine_iters");
    c.roi = RoiSpec::fromJson(j.at("roi"));
    return c;
  }
};

/// Batched trajectory: one Var [B, 2] per waypoint step.
template <typename S>
using TrajectorySteps = std::vector<ad::Var<S>>;

/// Per-command trajectories plus command likelihoods for one vehicle.
struct PlanSet {
  std::array<std::vector<Vec2>, kNumCommands> trajectories;  // vehicle frame
  std::array<double, kNumCommands> likelihood{};             // sums to 1
};

struct RefinedPlan {
  std::vector<Vec2> trajectory;               // final tau
  std::vector<std::vector<Vec2>> residuals;   // K entries
};

/// Motion planner: shared ROI embedding z, one GRU decoder per high-level
/// command emitting waypoint offsets, a linear likelihood head, and a single
/// goal-conditioned refinement GRU producing residuals.
template <typename S>
class PlannerModel {
 public:
  PlannerModel() = default;
  PlannerModel(const PlannerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    e1_ = nn::Conv2d<S>(params_, "embed.conv1", cfg.in_channels, 32, 3, 1, 1, rng);
    e2_ = nn::Conv2d<S>(params_, "embed.conv2", 32, 64, 3, 2, 1, rng);
    e3_ = nn::Conv2d<S>(params_, "embed.conv3", 64, cfg.embed_dim, 3, 2, 1, rng);
    for (int c = 0; c < kNumCommands; ++c) {
      const std::string name = std::string("decoder.") + commandName(static_cast<Command>(c));
      dec_[c].h0 = nn::Linear<S>(params_, name + ".h0", cfg.embed_dim, cfg.hidden, rng);
      dec_[c].gru = nn::GRUCell<S>(params_, name + ".gru", 2, cfg.hidden, rng);
      dec_[c].out = nn::Linear<S>(params_, name + ".out", cfg.hidden, 2, rng);
    }
    likelihood_ = nn::Linear<S>(params_, "likelihood", cfg.embed_dim, kNumCommands, rng);
    ref_h0_ = nn::Linear<S>(params_, "refine.h0", cfg.embed_dim, cfg.hidden, rng);
    ref_gru_ = nn::GRUCell<S>(params_, "refine.gru", 4, cfg.hidden, rng);
    // Zero-initialized residual head: refinement starts as the identity.
    ref_out_ = nn::Linear<S>(params_, "refine.out", cfg.hidden, 2, rng, /*zero_init=*/true);
  }

  const PlannerConfig& config() const { return cfg_; }
  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }

  /// CNN + global average pooling: ROIs [B, Cin, ny, nx] -> z [B, embed].
  ad::Var<S> embed(const ad::Var<S>& rois) const {
    using namespace ad;
    const int B = rois.value().dim(0);
    Var<S> h = relu(e1_.forward(rois));
    h = relu(e2_.forward(h));
    h = relu(e3_.forward(h));
    const auto& sh = h.value().shape();
    const int C = sh[1], HW = sh[2] * sh[3];
    Var<S> flat = reshape(h, {B * C, HW});
    Var<S> pooled = scale(rowSum(flat), S(1.0 / HW));
    return reshape(pooled, {B, C});
  }

  /// Roll one command decoder n times; waypoint_k = sum of emitted offsets.
  TrajectorySteps<S> decodeCommand(const ad::Var<S>& z, Command c) const {
    using namespace ad;
    const int B = z.value().dim(0);
    const auto& d = dec_[static_cast<int>(c)];
    Var<S> h = tanhv(d.h0.forward(z));
    Var<S> prev = Var<S>::constant(Tensor<S>({B, 2}));
    TrajectorySteps<S> waypoints;
    for (int t = 0; t < cfg_.n_waypoints; ++t) {
      h = d.gru.step(scale(prev, S(0.1)), h);
      Var<S> offset = d.out.forward(h);
      prev = waypoints.empty() ? offset : add(waypoints.back(), offset);
      waypoints.push_back(prev);
    }
    return waypoints;
  }

  std::array<TrajectorySteps<S>, kNumCommands> decodeAll(const ad::Var<S>& z) const {
    std::array<TrajectorySteps<S>, kNumCommands> out;
    for (int c = 0; c < kNumCommands; ++c)
      out[c] = decodeCommand(z, static_cast<Command>(c));
    return out;
  }

  ad::Var<S> likelihoodLogits(const ad::Var<S>& z) const {
    return likelihood_.forward(z);
  }

  /// One refinement rollout: residuals for each waypoint given the goal and
  /// the previous trajectory (both per-step [B, 2]).
  TrajectorySteps<S> refineStep(const ad::Var<S>& z, const ad::Var<S>& goal,
                                const TrajectorySteps<S>& tau_prev) const {
    using namespace ad;
    Var<S> h = tanhv(ref_h0_.forward(z));
    Var<S> goal_n = scale(goal, S(0.05));
    TrajectorySteps<S> deltas;
    for (int t = 0; t < cfg_.n_waypoints; ++t) {
      Var<S> inp = concatCols(goal_n, scale(tau_prev[t], S(0.1)));
      h = ref_gru_.step(inp, h);
      deltas.push_back(ref_out_.forward(h));
    }
    return deltas;
  }

  /// K refinement iterations starting from a detached coarse trajectory.
  /// Returns the trajectory after every iteration.
  std::vector<TrajectorySteps<S>> refineRollout(const ad::Var<S>& z,
                                                const ad::Var<S>& goal,
                                                const TrajectorySteps<S>& tau0,
                                                int iters) const {
    std::vector<TrajectorySteps<S>> taus;
    TrajectorySteps<S> tau = tau0;
    for (int k = 0; k < iters; ++k) {
      TrajectorySteps<S> deltas = refineStep(z, goal, tau);
      TrajectorySteps<S> next;
      for (int t = 0; t < cfg_.n_waypoints; ++t) next.push_back(ad::add(tau[t], deltas[t]));
      taus.push_back(next);
      tau = std::move(next);
    }
    return taus;
  }

  /// Inference: full per-command plan set with likelihoods for one ROI.
  PlanSet planSet(const Tensor<S>& roi) const {
    ad::Var<S> z = embed(ad::Var<S>::constant(
        roi.reshaped({1, cfg_.in_channels, cfg_.roi.ny, cfg_.roi.nx})));
    PlanSet out;
    for (int c = 0; c < kNumCommands; ++c) {
      auto steps = decodeCommand(z, static_cast<Command>(c));
      for (const auto& w : steps)
        out.trajectories[c].push_back({static_cast<double>(w.value().at(0, 0)),
                                       static_cast<double>(w.value().at(0, 1))});
    }
    auto probs = ad::softmaxRows(likelihoodLogits(z));
    for (int c = 0; c < kNumCommands; ++c)
      out.likelihood[c] = static_cast<double>(probs.value().at(0, c));
    return out;
  }

  /// Inference: coarse plan for a known command plus K goal-conditioned
  /// refinement iterations.
  RefinedPlan plan(const Tensor<S>& roi, Command cmd, const Vec2& goal, int iters) const {
    ad::Var<S> z = embed(ad::Var<S>::constant(
        roi.reshaped({1, cfg_.in_channels, cfg_.roi.ny, cfg_.roi.nx})));
    auto coarse = decodeCommand(z, cmd);
    TrajectorySteps<S> tau;
    for (auto& w : coarse) tau.push_back(w.detach());
    Tensor<S> g({1, 2});
    g.at(0, 0) = static_cast<S>(goal.x);
    g.at(0, 1) = static_cast<S>(goal.y);
    ad::Var<S> goal_v = ad::Var<S>::constant(g);

    RefinedPlan out;
    auto taus = refineRollout(z, goal_v, tau, iters);
    const TrajectorySteps<S>& final_tau = iters > 0 ? taus.back() : tau;
    for (int t = 0; t < cfg_.n_waypoints; ++t)
      out.trajectory.push_back({static_cast<double>(final_tau[t].value().at(0, 0)),
                                static_cast<double>(final_tau[t].value().at(0, 1))});
    for (int k = 0; k < iters; ++k) {
      std::vector<Vec2> res;
      for (int t = 0; t < cfg_.n_waypoints; ++t) {
        const auto& cur = taus[k][t].value();
        const auto& prev = k == 0 ? tau[t].value() : taus[k - 1][t].value();
        res.push_back({static_cast<double>(cur.at(0, 0) - prev.at(0, 0)),
                       static_cast<double>(cur.at(0, 1) - prev.at(0, 1))});
      }
      out.residuals.push_back(std::move(res));
    }
    return out;
  }

 private:
  struct CmdDecoder {
    nn::Linear<S> h0;
    nn::GRUCell<S> gru;
    nn::Linear<S> out;
  };

  PlannerConfig cfg_;
  nn::ParamStore<S> params_;
  nn::Conv2d<S> e1_, e2_, e3_;
  std::array<CmdDecoder, kNumCommands> dec_;
  nn::Linear<S> likelihood_;
  nn::Linear<S> ref_h0_;
  nn::GRUCell<S> ref_gru_;
  nn::Linear<S> ref_out_;
};

}  // namespace bevdrive
