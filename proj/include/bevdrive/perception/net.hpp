#pragma once

#include "bevdrive/core/checkpoint.hpp"
#include "bevdrive/core/nn.hpp"
#include "bevdrive/perception/pillars.hpp"

namespace bevdrive {

/// Raw head outputs (logits / regression channels) at pillar resolution,
/// still attached to the autodiff graph.
template <typename S>
struct HeadLogits {
  ad::Var<S> center_veh;  // [1,1,H,W]
  ad::Var<S> center_ped;  // [1,1,H,W]
  ad::Var<S> orient;      // [1,2,H,W] (sin, cos), unnormalized
  ad::Var<S> box;         // [1,2,H,W] (log hl, log hw)
  ad::Var<S> sem;         // [1,3,H,W] logits (road, solid, broken)
};

/// Decoded probability maps (the inference-facing view of the heads).
template <typename S>
struct HeadMaps {
  Tensor<S> centerness_vehicle, centerness_pedestrian;  // [H,W] in (0,1)
  Tensor<S> orientation;                                // [2,H,W]
  Tensor<S> box;                                        // [2,H,W]
  Tensor<S> sem_road, sem_solid, sem_broken;            // [H,W] in (0,1)
};

template <typename S>
HeadMaps<S> materializeHeadMaps(const HeadLogits<S>& h) {
  const auto& shape = h.center_veh.value().shape();
  const int H = shape[2], W = shape[3];
  auto sig = [&](const Tensor<S>& t, std::int64_t off) {
    Tensor<S> out({H, W});
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i)
      out[i] = S(1) / (S(1) + std::exp(-t[off + i]));
    return out;
  };
  HeadMaps<S> m;
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  m.centerness_vehicle = sig(h.center_veh.value(), 0);
  m.centerness_pedestrian = sig(h.center_ped.value(), 0);
  m.orientation = h.orient.value().reshaped({2, H, W});
  m.box = h.box.value().reshaped({2, H, W});
  m.sem_road = sig(h.sem.value(), 0);
  m.sem_solid = sig(h.sem.value(), plane);
  m.sem_broken = sig(h.sem.value(), 2 * plane);
  return m;
}

/// Pillar backbone: shared per-point MLP, per-pillar max, dense scatter, a
/// three-stage conv trunk with one downsample and a multi-scale merge, and
/// five branched heads upsampling back to pillar resolution.
template <typename S>
class PerceptionNet {
 public:
  static constexpr int kPointNetWidth = 32;
  static constexpr int kHeadWidth = 32;

  PerceptionNet() = default;
  PerceptionNet(const GridSpec& grid, std::uint64_t seed) : grid_(grid) {
    Rng rng(seed);
    pn1_ = nn::Linear<S>(params_, "pointnet.fc1", kPillarFeatureDim, kPointNetWidth, rng);
    pn2_ = nn::Linear<S>(params_, "pointnet.fc2", kPointNetWidth, kPointNetWidth, rng);
    stage1_ = nn::Conv2d<S>(params_, "trunk.stage1", kPointNetWidth, 32, 3, 2, 1, rng);
    stage2_ = nn::Conv2d<S>(params_, "trunk.stage2", 32, 64, 3, 1, 1, rng);
    stage3_ = nn::Conv2d<S>(params_, "trunk.stage3", 64, 64, 3, 1, 1, rng);
    fuse_ = nn::Conv2d<S>(params_, "trunk.fuse", 128, grid.channels, 1, 1, 0, rng);
    auto mkHead = [&](const std::string& name, int out_ch) {
      Head h;
      h.conv = nn::Conv2d<S>(params_, name + ".conv", grid.channels, kHeadWidth, 3, 1, 1, rng);
      h.up = nn::ConvTranspose2d<S>(params_, name + ".up", kHeadWidth, out_ch, 3, 2, 1, 1, rng);
      return h;
    };
    h_center_veh_ = mkHead("head.center_vehicle", 1);
    h_center_ped_ = mkHead("head.center_pedestrian", 1);
    h_orient_ = mkHead("head.orientation", 2);
    h_box_ = mkHead("head.box", 2);
    h_sem_ = mkHead("head.semantic", 3);
  }

  const GridSpec& grid() const { return grid_; }
  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }

  /// Map-view feature grid f: [1, C, rows/2, cols/2].
  ad::Var<S> features(const SparsePillars<S>& pillars) const {
    if (!(pillars.spec == grid_))
      throw std::invalid_argument("backbone: pillar grid spec mismatch");
    using namespace ad;
    const int n_points = pillars.feats.numel() > 0 ? pillars.feats.dim(0) : 0;
    Tensor<S> scaled = pillars.feats;
    for (int i = 0; i < n_points; ++i) {
      scaled.at(i, 0) = normX(scaled.at(i, 0));
      scaled.at(i, 1) = normY(scaled.at(i, 1));
      scaled.at(i, 2) = scaled.at(i, 2) * S(0.5);
      scaled.at(i, 9) = scaled.at(i, 9) / S(grid_.pillar);
      scaled.at(i, 10) = scaled.at(i, 10) / S(grid_.pillar);
    }
    Var<S> x = Var<S>::constant(std::move(scaled));
    Var<S> h = relu(pn1_.forward(x));
    h = relu(pn2_.forward(h));
    Var<S> pooled = segmentMax(h, pillars.seg, pillars.pillarCount());
    Var<S> dense = scatterToGrid(pooled, pillars.rows, pillars.cols, grid_.rows(),
                                 grid_.cols());
    Var<S> g = reshape(dense, {1, kPointNetWidth, grid_.rows(), grid_.cols()});
    Var<S> s1 = relu(stage1_.forward(g));
    Var<S> s2 = relu(stage2_.forward(s1));
    Var<S> s3 = relu(stage3_.forward(s2));
    const int oh = grid_.outRows(), ow = grid_.outCols();
    Var<S> cat = concatChannels<S>({reshape(s2, {64, oh, ow}), reshape(s3, {64, oh, ow})});
    Var<S> f = relu(fuse_.forward(reshape(cat, {1, 128, oh, ow})));
    return f;
  }

  HeadLogits<S> heads(const ad::Var<S>& f) const {
    using namespace ad;
    auto run = [&](const Head& h) { return h.up.forward(relu(h.conv.forward(f))); };
    HeadLogits<S> out;
    out.center_veh = run(h_center_veh_);
    out.center_ped = run(h_center_ped_);
    out.orient = run(h_orient_);
    out.box = run(h_box_);
    out.sem = run(h_sem_);
    return out;
  }

 private:
  S normX(S x) const { return (x - S(0.5) * S(grid_.x_min + grid_.x_max)) /
                              S(0.5 * (grid_.x_max - grid_.x_min)); }
  S normY(S y) const { return (y - S(0.5) * S(grid_.y_min + grid_.y_max)) /
                              S(0.5 * (grid_.y_max - grid_.y_min)); }

  struct Head {
    nn::Conv2d<S> conv;
    nn::ConvTranspose2d<S> up;
  };

  GridSpec grid_;
  nn::ParamStore<S> params_;
  nn::Linear<S> pn1_, pn2_;
  nn::Conv2d<S> stage1_, stage2_, stage3_, fuse_;
  Head h_center_veh_, h_center_ped_, h_orient_, h_box_, h_sem_;
};

}  // namespace bevdrive
