#pragma once

#include <nlohmann/json.hpp>

#include "bevdrive/geometry.hpp"

namespace bevdrive {

/// Metric BEV grid specification shared by pillars, head maps, rasters and
/// ROI warping. Row index follows y, column index follows x.
struct GridSpec {
  double x_min = -10.0, x_max = 70.0;
  double y_min = -40.0, y_max = 40.0;
  double pillar = 0.5;   // pillar edge length, m
  int out_stride = 2;    // backbone output downsampling
  int channels = 64;     // backbone feature channels

  int cols() const { return static_cast<int>(std::round((x_max - x_min) / pillar)); }
  int rows() const { return static_cast<int>(std::round((y_max - y_min) / pillar)); }
  int outCols() const { return cols() / out_stride; }
  int outRows() const { return rows() / out_stride; }
  double outCell() const { return pillar * out_stride; }

  bool valid() const {
    const double eps = 1e-9;
    auto divisible = [&](double range) {
      const double q = range / pillar;
      return std::abs(q - std::round(q)) < eps;
    };
    return pillar > 0 && divisible(x_max - x_min) && divisible(y_max - y_min) &&
           cols() % out_stride == 0 && rows() % out_stride == 0;
  }

  bool inRange(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }

  int colOf(double x) const { return static_cast<int>(std::floor((x - x_min) / pillar)); }
  int rowOf(double y) const { return static_cast<int>(std::floor((y - y_min) / pillar)); }

  Vec2 cellCenter(int row, int col) const {
    return {x_min + (col + 0.5) * pillar, y_min + (row + 0.5) * pillar};
  }

  /// Continuous (col, row) coordinates of a metric point at the feature
  /// resolution (cell centers sit at integer coordinates).
  Vec2 toOutCell(const Vec2& p) const {
    const double c = (p.x - x_min) / outCell() - 0.5;
    const double r = (p.y - y_min) / outCell() - 0.5;
    return {c, r};
  }

  bool operator==(const GridSpec& o) const {
    return x_min == o.x_min && x_max == o.x_max && y_min == o.y_min && y_max == o.y_max &&
           pillar == o.pillar && out_stride == o.out_stride && channels == o.channels;
  }

  nlohmann::json toJson() const {
    return {{"x_min", x_min}, {"x_max", x_max}, {"y_min", y_min}, {"y_max", y_max},
            {"pillar", pillar}, {"out_stride", out_stride}, {"channels", channels}};
  }
  static GridSpec fromJson(const nlohmann::json& j) {
    GridSpec g;
    g.x_min = j.at("x_min");
    g.x_max = j.at("x_max");
    g.y_min = j.at("y_min");
    g.y_max = j.at("y_max");
    g.pillar = j.at("pillar");
    g.out_stride = j.at("out_stride");
    g.channels = j.at("channels");
    return g;
  }
};

}  // namespace bevdrive
