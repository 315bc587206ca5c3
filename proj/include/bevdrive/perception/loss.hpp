#pragma once

#include "bevdrive/microworld/frame.hpp"
#include "bevdrive/perception/decode.hpp"

namespace bevdrive {

/// CenterNet-style gaussian radius for a box footprint (cells), min overlap 0.7.
inline double gaussianRadius(double height, double width, double min_overlap = 0.7) {
  const double a1 = 1, b1 = height + width, c1 = width * height * (1 - min_overlap) /
                                                 (1 + min_overlap);
  const double r1 = (b1 - std::sqrt(std::max(0.0, b1 * b1 - 4 * a1 * c1))) / 2;
  const double a2 = 4, b2 = 2 * (height + width),
               c2 = (1 - min_overlap) * width * height;
  const double r2 = (b2 - std::sqrt(std::max(0.0, b2 * b2 - 4 * a2 * c2))) / 2;
  const double a3 = 4 * min_overlap, b3 = -2 * min_overlap * (height + width),
               c3 = (min_overlap - 1) * width * height;
  const double r3 = (b3 + std::sqrt(std::max(0.0, b3 * b3 - 4 * a3 * c3))) / 2;
  return std::min({r1, r2, r3});
}

template <typename S>
struct DetectionTargets {
  Tensor<S> center_veh, center_ped;  // [H,W] gaussians peaking at 1
  Tensor<S> orient, box;             // [2,H,W] regression values
  Tensor<S> reg_mask;                // [H,W] 1 at gt center cells
  int n_pos = 0;
};

/// Splat ground-truth boxes (ego frame) onto target maps at pillar
/// resolution. Regression values are written over each gaussian's support
/// (nearest box wins); the regression mask marks center cells only.
template <typename S>
DetectionTargets<S> splatDetectionTargets(const std::vector<OrientedBox>& boxes,
                                          const GridSpec& grid) {
  const int H = grid.rows(), W = grid.cols();
  DetectionTargets<S> t;
  t.center_veh = Tensor<S>({H, W});
  t.center_ped = Tensor<S>({H, W});
  t.orient = Tensor<S>({2, H, W});
  t.box = Tensor<S>({2, H, W});
  t.reg_mask = Tensor<S>({H, W});
  Tensor<double> owner_d2({H, W}, 1e18);

  for (const auto& b : boxes) {
    if (!grid.inRange(b.pose.p.x, b.pose.p.y)) continue;
    const int cy = grid.rowOf(b.pose.p.y), cx = grid.colOf(b.pose.p.x);
    const double h_cells = 2.0 * b.extent.x / grid.pillar;
    const double w_cells = 2.0 * b.extent.y / grid.pillar;
    const int radius = std::max(1, static_cast<int>(gaussianRadius(h_cells, w_cells)));
    const double sigma = (2.0 * radius + 1.0) / 6.0;
    Tensor<S>& heat = b.cls == ActorClass::kVehicle ? t.center_veh : t.center_ped;
    for (int dy = -3 * radius; dy <= 3 * radius; ++dy) {
      for (int dx = -3 * radius; dx <= 3 * radius; ++dx) {
        const int y = cy + dy, x = cx + dx;
        if (y < 0 || x < 0 || y >= H || x >= W) continue;
        const double g = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
        if (g < 1e-4) continue;
        heat.at(y, x) = std::max(heat.at(y, x), static_cast<S>(g));
        const double d2 = dx * dx + dy * dy;
        if (g > 0.25 && d2 < owner_d2.at(y, x)) {
          owner_d2.at(y, x) = d2;
          t.orient.at(0, y, x) = static_cast<S>(std::sin(b.pose.yaw));
          t.orient.at(1, y, x) = static_cast<S>(std::cos(b.pose.yaw));
          t.box.at(0, y, x) = static_cast<S>(std::log(b.extent.x));
          t.box.at(1, y, x) = static_cast<S>(std::log(b.extent.y));
        }
      }
    }
    heat.at(cy, cx) = S(1);
    t.reg_mask.at(cy, cx) = S(1);
    ++t.n_pos;
  }
  return t;
}

/// Ego-frame ground-truth boxes for a frame, ego explicitly included.
inline std::vector<OrientedBox> gtBoxesFromFrame(const Frame& frame) {
  std::vector<OrientedBox> out;
  const ActorState* ego = frame.ego();
  if (!ego) return out;
  for (const auto& a : frame.actors) {
    OrientedBox b;
    b.pose = ego->pose.toLocalPose(a.pose);
    b.extent = a.extent;
    b.cls = a.cls;
    b.score = 1.0;
    b.is_ego = a.id == kEgoId;
    out.push_back(b);
  }
  return out;
}

template <typename S>
Tensor<S> semTargetsFromRasters(const SemRasters& r) {
  const int H = r.road.rows, W = r.road.cols;
  Tensor<S> t({3, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      t.at(0, y, x) = r.road.at(y, x) ? S(1) : S(0);
      t.at(1, y, x) = r.solid.at(y, x) ? S(1) : S(0);
      t.at(2, y, x) = r.broken.at(y, x) ? S(1) : S(0);
    }
  return t;
}

template <typename S>
struct PerceptionLossOut {
  ad::Var<S> total;
  double focal = 0, sem_bce = 0, l1_orient = 0, l1_box = 0;
};

struct PerceptionLossWeights {
  double focal = 1.0;
  double sem = 1.0;
  double reg = 1.0;
};

/// BCE over the three semantic grids + penalty-reduced focal loss on the
/// centerness maps + masked L1 on orientation/box at gt centers.
template <typename S>
PerceptionLossOut<S> perceptionLoss(const HeadLogits<S>& heads,
                                    const DetectionTargets<S>& det,
                                    const Tensor<S>& sem_targets,
                                    const PerceptionLossWeights& w = {}) {
  using namespace ad;
  const auto& shape = heads.center_veh.value().shape();
  const int H = shape[2], W = shape[3];
  if (sem_targets.dim(1) != H || sem_targets.dim(2) != W ||
      det.center_veh.dim(0) != H || det.center_veh.dim(1) != W)
    throw std::invalid_argument("perception_loss: grid mismatch");
  const double n_pos = std::max(1, det.n_pos);

  auto focalOne = [&](const Var<S>& logits, const Tensor<S>& target) {
    const std::int64_t n = static_cast<std::int64_t>(H) * W;
    Tensor<S> pos_mask({H, W}), neg_w({H, W});
    for (std::int64_t i = 0; i < n; ++i) {
      const double y = static_cast<double>(target[i]);
      if (y >= 1.0) {
        pos_mask[i] = S(1);
      } else {
        const double q = 1.0 - y;
        neg_w[i] = static_cast<S>(q * q * q * q);
      }
    }
    Var<S> x = reshape(logits, {H, W});
    Var<S> p = sigmoid(x);
    Var<S> one_minus_p = addScalar(scale(p, S(-1)), S(1));
    Var<S> log_p = scale(softplus(scale(x, S(-1))), S(-1));
    Var<S> log_1mp = scale(softplus(x), S(-1));
    Var<S> pos = mul(Var<S>::constant(pos_mask), mul(square(one_minus_p), log_p));
    Var<S> neg = mul(Var<S>::constant(neg_w), mul(square(p), log_1mp));
    return scale(add(sumAll(pos), sumAll(neg)), S(-1.0 / n_pos));
  };

  Var<S> focal = add(focalOne(heads.center_veh, det.center_veh),
                     focalOne(heads.center_ped, det.center_ped));

  // Semantic BCE with logits: mean(softplus(x) - x*y).
  Var<S> sem_x = reshape(heads.sem, {3, H * W});
  Var<S> sem_y = Var<S>::constant(sem_targets.reshaped({3, H * W}));
  Var<S> sem_bce = meanAll(sub(softplus(sem_x), mul(sem_x, sem_y)));

  // Masked L1 at gt centers.
  Tensor<S> mask2({2, H, W});
  for (int c = 0; c < 2; ++c)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i)
      mask2[c * static_cast<std::int64_t>(H) * W + i] = det.reg_mask[i];
  auto maskedL1 = [&](const Var<S>& pred, const Tensor<S>& tgt) {
    Var<S> diff = sub(reshape(pred, {2, H * W}),
                      Var<S>::constant(tgt.reshaped({2, H * W})));
    Var<S> m = Var<S>::constant(mask2.reshaped({2, H * W}));
    return scale(sumAll(mul(absv(diff), m)), S(1.0 / (2.0 * n_pos)));
  };
  Var<S> l1_orient = maskedL1(heads.orient, det.orient);
  Var<S> l1_box = maskedL1(heads.box, det.box);

  PerceptionLossOut<S> out;
  out.focal = static_cast<double>(focal.item());
  out.sem_bce = static_cast<double>(sem_bce.item());
  out.l1_orient = static_cast<double>(l1_orient.item());
  out.l1_box = static_cast<double>(l1_box.item());
  out.total = add(add(scale(focal, S(w.focal)), scale(sem_bce, S(w.sem))),
                  scale(add(l1_orient, l1_box), S(w.reg)));
  return out;
}

}  // namespace bevdrive
