#pragma once

#include "bevdrive/core/autodiff.hpp"
#include "bevdrive/perception/grid.hpp"

namespace bevdrive {

/// Fixed ROI template in a vehicle's local frame (+x forward), ahead-biased.
struct RoiSpec {
  int nx = 24, ny = 12;       // samples along forward / lateral
  double spacing = 0.5;       // m between samples
  double x0 = -2.0, y0 = -3.0;  // template corner in the vehicle frame

  Vec2 samplePoint(int j, int i) const {
    return {x0 + (i + 0.5) * spacing, y0 + (j + 0.5) * spacing};
  }

  nlohmann::json toJson() const {
    return {{"nx", nx}, {"ny", ny}, {"spacing", spacing}, {"x0", x0}, {"y0", y0}};
  }
  static RoiSpec fromJson(const nlohmann::json& j) {
    RoiSpec r;
    r.nx = j.at("nx");
    r.ny = j.at("ny");
    r.spacing = j.at("spacing");
    r.x0 = j.at("x0");
    r.y0 = j.at("y0");
    return r;
  }
};

/// Geometry of a feature plane: metric origin and cell size of a [C, rows,
/// cols] grid, used to place bilinear samples. Derived from a GridSpec at
/// either pillar or backbone-output resolution.
struct FeatureGeom {
  double x_min = 0, y_min = 0, cell = 1.0;
  int rows = 0, cols = 0;

  static FeatureGeom output(const GridSpec& g) {
    return {g.x_min, g.y_min, g.outCell(), g.outRows(), g.outCols()};
  }
  static FeatureGeom pillarLevel(const GridSpec& g) {
    return {g.x_min, g.y_min, g.pillar, g.rows(), g.cols()};
  }

  /// Continuous (col, row) of a metric point; cell centers at integers.
  std::pair<double, double> toCell(const Vec2& p) const {
    return {(p.x - x_min) / cell - 0.5, (p.y - y_min) / cell - 0.5};
  }
  bool contains(const Vec2& p) const {
    return p.x >= x_min && p.x < x_min + cell * cols && p.y >= y_min &&
           p.y < y_min + cell * rows;
  }
};

/// Differentiable rotated-ROI crop: bilinear samples of f ([C, rows, cols])
/// on the template placed at `pose`. Gradients flow to f; the pose is fixed.
template <typename S>
ad::Var<S> roiWarp(const ad::Var<S>& f, const FeatureGeom& geom, const Pose2& pose,
                   const RoiSpec& spec) {
  if (!geom.contains(pose.p))
    throw std::invalid_argument("roi_warp: pose outside grid bounds");
  std::vector<std::pair<S, S>> pts;
  pts.reserve(static_cast<std::size_t>(spec.nx) * spec.ny);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      const Vec2 w = pose.toWorld(spec.samplePoint(j, i));
      const auto [cx, cy] = geom.toCell(w);
      pts.push_back({static_cast<S>(cx), static_cast<S>(cy)});
    }
  }
  ad::Var<S> flat = ad::bilinearSample(f, pts);  // [C, ny*nx]
  return ad::reshape(flat, {f.value().dim(0), spec.ny, spec.nx});
}

/// Non-differentiable variant for constant grids (ground-truth rasters).
template <typename S>
Tensor<S> roiWarpValue(const Tensor<S>& f, const FeatureGeom& geom, const Pose2& pose,
                       const RoiSpec& spec) {
  auto v = ad::Var<S>::constant(f);
  return roiWarp(v, geom, pose, spec).value();
}

}  // namespace bevdrive
