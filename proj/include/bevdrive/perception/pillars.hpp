#pragma once

#include <map>

#include "bevdrive/core/tensor.hpp"
#include "bevdrive/perception/grid.hpp"

namespace bevdrive {

/// point_paint: append per-point semantic scores to the raw point features.
/// Output rows are (x, y, z, intensity, s0..s4); order preserved.
template <typename S>
Tensor<S> pointPaint(const Tensor<S>& points, const Tensor<S>& scores) {
  const int n = points.dim(0);
  if (scores.dim(0) != n || scores.dim(1) != 5)
    throw std::invalid_argument("point_paint: need one 5-class score row per point");
  Tensor<S> out({n, 9});
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 4; ++c) out.at(i, c) = points.at(i, c);
    for (int c = 0; c < 5; ++c) out.at(i, 4 + c) = scores.at(i, c);
  }
  return out;
}

inline constexpr int kPillarFeatureDim = 11;  // painted 9 + offsets to pillar center

/// Sparse pillar tensor: per-point features grouped by pillar, with the
/// segment index vector the backbone's segmented max-pool consumes.
template <typename S>
struct SparsePillars {
  GridSpec spec;
  std::vector<int> rows, cols;  // per pillar
  Tensor<S> feats;              // total_points x kPillarFeatureDim
  std::vector<int> seg;         // per point -> pillar index (sorted, contiguous)
  int max_points = 16;

  int pillarCount() const { return static_cast<int>(rows.size()); }
};

/// Bin painted points into sparse pillars. Out-of-range points are dropped;
/// each pillar keeps at most max_points points, preferring those closest to
/// the pillar center with a coordinate tie-break, which makes the result
/// independent of input order.
template <typename S>
SparsePillars<S> pillarize(const Tensor<S>& painted, const GridSpec& spec,
                           int max_points = 16) {
  if (!spec.valid()) throw std::invalid_argument("pillarize: invalid grid spec");
  if (painted.numel() > 0 && painted.dim(1) != 9)
    throw std::invalid_argument("pillarize: expected painted 9-dim points");

  struct Entry {
    double d2;
    double x, y, z;
    int idx;
    bool operator<(const Entry& o) const {
      return std::tie(d2, x, y, z) < std::tie(o.d2, o.x, o.y, o.z);
    }
  };
  std::map<std::pair<int, int>, std::vector<Entry>> cells;
  const int n = painted.numel() > 0 ? painted.dim(0) : 0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(painted.at(i, 0));
    const double y = static_cast<double>(painted.at(i, 1));
    if (!spec.inRange(x, y)) continue;
    const int row = spec.rowOf(y), col = spec.colOf(x);
    const Vec2 c = spec.cellCenter(row, col);
    const double dx = x - c.x, dy = y - c.y;
    cells[{row, col}].push_back(
        {dx * dx + dy * dy, x, y, static_cast<double>(painted.at(i, 2)), i});
  }

  SparsePillars<S> out;
  out.spec = spec;
  out.max_points = max_points;
  std::vector<S> feats;
  int pillar = 0;
  for (auto& [rc, entries] : cells) {
    std::sort(entries.begin(), entries.end());
    const int keep = std::min<int>(max_points, static_cast<int>(entries.size()));
    out.rows.push_back(rc.first);
    out.cols.push_back(rc.second);
    const Vec2 c = spec.cellCenter(rc.first, rc.second);
    for (int k = 0; k < keep; ++k) {
      const int i = entries[k].idx;
      for (int f = 0; f < 9; ++f) feats.push_back(painted.at(i, f));
      feats.push_back(static_cast<S>(painted.at(i, 0) - c.x));
      feats.push_back(static_cast<S>(painted.at(i, 1) - c.y));
      out.seg.push_back(pillar);
    }
    ++pillar;
  }
  out.feats = Tensor<S>({static_cast<int>(out.seg.size()), kPillarFeatureDim},
                        std::move(feats));
  return out;
}

}  // namespace bevdrive
