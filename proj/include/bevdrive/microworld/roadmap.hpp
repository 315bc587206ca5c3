#pragma once

#include <map>
#include <string>
#include <tuple>

#include "bevdrive/core/random.hpp"
#include "bevdrive/microworld/types.hpp"

namespace bevdrive {

enum class BoundaryType : int { kSolid = 0, kBroken = 1 };

struct LaneBoundary {
  Polyline line;
  BoundaryType type = BoundaryType::kSolid;
};

struct Lane {
  int id = 0;
  Polyline center;
  double width = 3.5;
  int left_neighbor = -1;   // same-direction lane available for a left change
  int right_neighbor = -1;
};

/// Directed lane-to-lane link through an intersection (or a plain
/// continuation), tagged with the maneuver it encodes.
struct LaneConnection {
  int from = -1, to = -1;
  Command cmd = Command::kGoStraight;
  Polyline path;
  int intersection = -1;
};

struct IntersectionSpec {
  Vec2 center;
  double half_size = 3.5;
  bool has_lights = false;
  std::vector<int> connection_ids;
};

/// Binary occupancy bitmap over the map bounds, used as the rasterization
/// source for BEV semantic targets.
struct WorldBitmap {
  double x0 = 0, y0 = 0, res = 0.25;
  int w = 0, h = 0;
  std::vector<std::uint8_t> bits;

  void init(double x0_, double y0_, double x1, double y1, double res_) {
    x0 = x0_;
    y0 = y0_;
    res = res_;
    w = static_cast<int>(std::ceil((x1 - x0) / res));
    h = static_cast<int>(std::ceil((y1 - y0) / res));
    bits.assign((static_cast<std::size_t>(w) * h + 7) / 8, 0);
  }
  void set(int ix, int iy) {
    if (ix < 0 || iy < 0 || ix >= w || iy >= h) return;
    const std::size_t i = static_cast<std::size_t>(iy) * w + ix;
    bits[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
  bool at(double x, double y) const {
    const int ix = static_cast<int>(std::floor((x - x0) / res));
    const int iy = static_cast<int>(std::floor((y - y0) / res));
    if (ix < 0 || iy < 0 || ix >= w || iy >= h) return false;
    const std::size_t i = static_cast<std::size_t>(iy) * w + ix;
    return (bits[i >> 3] >> (i & 7)) & 1u;
  }
};

class RoadMap {
 public:
  std::string id;
  std::vector<Lane> lanes;
  std::vector<LaneConnection> connections;
  std::vector<LaneBoundary> boundaries;
  std::vector<OrientedRect> drivable;  // union of oriented road rectangles
  std::vector<Segment> walls;          // lidar-visible road edges
  std::vector<IntersectionSpec> intersections;
  std::vector<TrafficLight> lights;
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  bool insideDrivable(const Vec2& p) const {
    for (const auto& r : drivable)
      if (r.contains(p)) return true;
    return false;
  }

  std::vector<int> outgoing(int lane) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(connections.size()); ++i)
      if (connections[i].from == lane) out.push_back(i);
    return out;
  }

  /// Pre-render road / solid / broken occupancy at bitmap resolution.
  void buildBitmaps(double res = 0.25) {
    road_bm_.init(min_x - 2, min_y - 2, max_x + 2, max_y + 2, res);
    solid_bm_.init(min_x - 2, min_y - 2, max_x + 2, max_y + 2, res);
    broken_bm_.init(min_x - 2, min_y - 2, max_x + 2, max_y + 2, res);
    for (int iy = 0; iy < road_bm_.h; ++iy)
      for (int ix = 0; ix < road_bm_.w; ++ix) {
        const Vec2 p{road_bm_.x0 + (ix + 0.5) * res, road_bm_.y0 + (iy + 0.5) * res};
        if (insideDrivable(p)) road_bm_.set(ix, iy);
      }
    const double half_mark = 0.25;  // marking half width
    auto stamp = [&](const Polyline& line, WorldBitmap& bm) {
      const double step = res * 0.5;
      for (double s = 0.0; s <= line.length(); s += step) {
        const Vec2 c = line.sample(s);
        const Vec2 t = line.tangent(s);
        const Vec2 nrm{-t.y, t.x};
        for (double o = -half_mark; o <= half_mark; o += res * 0.5) {
          const Vec2 p = c + nrm * o;
          bm.set(static_cast<int>(std::floor((p.x - bm.x0) / res)),
                 static_cast<int>(std::floor((p.y - bm.y0) / res)));
        }
      }
    };
    for (const auto& b : boundaries)
      stamp(b.line, b.type == BoundaryType::kSolid ? solid_bm_ : broken_bm_);
  }

  const WorldBitmap& roadBitmap() const { return road_bm_; }
  const WorldBitmap& solidBitmap() const { return solid_bm_; }
  const WorldBitmap& brokenBitmap() const { return broken_bm_; }

 private:
  WorldBitmap road_bm_, solid_bm_, broken_bm_;
};

namespace mapgen {

/// One straight two-way road along +x, one lane per direction.
inline RoadMap straightRoad(double length = 200.0, double lane_width = 3.5) {
  RoadMap m;
  m.id = "straight";
  const double w = lane_width;  // road half width (one lane each way)
  const double x0 = -length / 2, x1 = length / 2;
  Lane east;
  east.id = 0;
  east.center = Polyline({{x0, -w / 2}, {x1, -w / 2}});
  east.width = w;
  Lane west;
  west.id = 1;
  west.center = Polyline({{x1, w / 2}, {x0, w / 2}});
  west.width = w;
  m.lanes = {east, west};
  m.boundaries.push_back({Polyline({{x0, -w}, {x1, -w}}), BoundaryType::kSolid});
  m.boundaries.push_back({Polyline({{x0, w}, {x1, w}}), BoundaryType::kSolid});
  m.boundaries.push_back({Polyline({{x0, 0}, {x1, 0}}), BoundaryType::kBroken});
  m.drivable.push_back({{{0, 0}, 0.0}, length / 2, w});
  m.walls.push_back({{x0, -w}, {x1, -w}});
  m.walls.push_back({{x0, w}, {x1, w}});
  m.min_x = x0;
  m.max_x = x1;
  m.min_y = -w - 5;
  m.max_y = w + 5;
  m.buildBitmaps();
  return m;
}

/// Straight road with two lanes per direction (lane changes possible).
inline RoadMap multilaneRoad(double length = 220.0, double lane_width = 3.5) {
  RoadMap m;
  m.id = "multilane";
  const double w = lane_width;
  const double x0 = -length / 2, x1 = length / 2;
  auto mk = [&](int id, double y, bool east) {
    Lane l;
    l.id = id;
    l.width = w;
    if (east)
      l.center = Polyline({{x0, y}, {x1, y}});
    else
      l.center = Polyline({{x1, y}, {x0, y}});
    return l;
  };
  // Eastbound at y=-0.5w (inner) and y=-1.5w (outer); westbound mirrored.
  Lane e_in = mk(0, -0.5 * w, true), e_out = mk(1, -1.5 * w, true);
  Lane w_in = mk(2, 0.5 * w, false), w_out = mk(3, 1.5 * w, false);
  e_in.right_neighbor = 1;
  e_out.left_neighbor = 0;
  w_in.right_neighbor = 3;
  w_out.left_neighbor = 2;
  m.lanes = {e_in, e_out, w_in, w_out};
  m.boundaries.push_back({Polyline({{x0, -2 * w}, {x1, -2 * w}}), BoundaryType::kSolid});
  m.boundaries.push_back({Polyline({{x0, 2 * w}, {x1, 2 * w}}), BoundaryType::kSolid});
  m.boundaries.push_back({Polyline({{x0, 0}, {x1, 0}}), BoundaryType::kSolid});
  m.boundaries.push_back({Polyline({{x0, -w}, {x1, -w}}), BoundaryType::kBroken});
  m.boundaries.push_back({Polyline({{x0, w}, {x1, w}}), BoundaryType::kBroken});
  m.drivable.push_back({{{0, 0}, 0.0}, length / 2, 2 * w});
  m.walls.push_back({{x0, -2 * w}, {x1, -2 * w}});
  m.walls.push_back({{x0, 2 * w}, {x1, 2 * w}});
  m.min_x = x0;
  m.max_x = x1;
  m.min_y = -2 * w - 5;
  m.max_y = 2 * w + 5;
  m.buildBitmaps();
  return m;
}

namespace detail {

inline Polyline bezier(const Vec2& p0, const Vec2& c, const Vec2& p2, int samples = 9) {
  std::vector<Vec2> pts;
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double a = (1 - t) * (1 - t), b = 2 * t * (1 - t), d = t * t;
    pts.push_back(p0 * a + c * b + p2 * d);
  }
  return Polyline(pts);
}

}  // namespace detail

/// Manhattan grid town: `nx` x `ny` streets with four-way intersections,
/// one lane per direction, lights on a configurable subset of intersections.
inline RoadMap gridTown(int nx = 3, int ny = 3, double spacing = 70.0,
                        double lane_width = 3.5, bool with_lights = false) {
  RoadMap m;
  m.id = "town" + std::to_string(nx) + "x" + std::to_string(ny) +
         (with_lights ? "L" : "");
  const double w = lane_width;       // road half width
  const double off = lane_width / 2; // lane center offset from road axis
  std::vector<double> xs, ys;
  for (int i = 0; i < nx; ++i) xs.push_back((i - (nx - 1) * 0.5) * spacing);
  for (int j = 0; j < ny; ++j) ys.push_back((j - (ny - 1) * 0.5) * spacing);
  const double margin = spacing * 0.45;
  const double x_lo = xs.front() - margin, x_hi = xs.back() + margin;
  const double y_lo = ys.front() - margin, y_hi = ys.back() + margin;

  // Directed lane segments between consecutive intersections (and the stubs
  // out to the map edge). Key: lanes kept in a map for id assignment.
  struct SegKey {
    int axis;  // 0 horizontal, 1 vertical
    int road;  // index into ys (horizontal) or xs (vertical)
    int cell;  // segment index along the road
    int dir;   // +1 forward (+x or +y), -1 backward
    bool operator<(const SegKey& o) const {
      return std::tie(axis, road, cell, dir) < std::tie(o.axis, o.road, o.cell, o.dir);
    }
  };
  std::map<SegKey, int> lane_ids;

  auto addLane = [&](const SegKey& k, Vec2 a, Vec2 b) {
    Lane l;
    l.id = static_cast<int>(m.lanes.size());
    l.width = w;
    l.center = Polyline({a, b});
    m.lanes.push_back(l);
    lane_ids[k] = l.id;
    return l.id;
  };

  // Horizontal roads.
  for (int j = 0; j < ny; ++j) {
    std::vector<double> cuts = {x_lo};
    for (double x : xs) cuts.push_back(x);
    cuts.push_back(x_hi);
    for (int c = 0; c + 1 < static_cast<int>(cuts.size()); ++c) {
      const double a = (c == 0) ? cuts[0] : cuts[c] + w;
      const double b = (c + 2 == static_cast<int>(cuts.size())) ? cuts[c + 1]
                                                                : cuts[c + 1] - w;
      if (b - a < 1.0) continue;
      addLane({0, j, c, +1}, {a, ys[j] - off}, {b, ys[j] - off});
      addLane({0, j, c, -1}, {b, ys[j] + off}, {a, ys[j] + off});
    }
  }
  // Vertical roads.
  for (int i = 0; i < nx; ++i) {
    std::vector<double> cuts = {y_lo};
    for (double y : ys) cuts.push_back(y);
    cuts.push_back(y_hi);
    for (int c = 0; c + 1 < static_cast<int>(cuts.size()); ++c) {
      const double a = (c == 0) ? cuts[0] : cuts[c] + w;
      const double b = (c + 2 == static_cast<int>(cuts.size())) ? cuts[c + 1]
                                                                : cuts[c + 1] - w;
      if (b - a < 1.0) continue;
      addLane({1, i, c, +1}, {xs[i] + off, a}, {xs[i] + off, b});
      addLane({1, i, c, -1}, {xs[i] - off, b}, {xs[i] - off, a});
    }
  }

  auto laneAt = [&](const SegKey& k) -> int {
    auto it = lane_ids.find(k);
    return it == lane_ids.end() ? -1 : it->second;
  };

  // Intersections and their connections.
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      IntersectionSpec isec;
      isec.center = {xs[i], ys[j]};
      isec.half_size = w;
      isec.has_lights = with_lights;
      const int iid = static_cast<int>(m.intersections.size());
      // Incoming lanes: (lane id, entry heading yaw).
      struct In {
        int lane;
        double yaw;
      };
      std::vector<In> in = {{laneAt({0, j, i, +1}), 0.0},
                            {laneAt({0, j, i + 1, -1}), M_PI},
                            {laneAt({1, i, j, +1}), M_PI_2},
                            {laneAt({1, i, j + 1, -1}), -M_PI_2}};
      std::vector<In> out = {{laneAt({0, j, i + 1, +1}), 0.0},
                             {laneAt({0, j, i, -1}), M_PI},
                             {laneAt({1, i, j + 1, +1}), M_PI_2},
                             {laneAt({1, i, j, -1}), -M_PI_2}};
      for (const auto& a : in) {
        if (a.lane < 0) continue;
        for (const auto& b : out) {
          if (b.lane < 0) continue;
          const double turn = wrapAngle(b.yaw - a.yaw);
          if (std::abs(std::abs(turn) - M_PI) < 0.1) continue;  // no U-turns
          LaneConnection conn;
          conn.from = a.lane;
          conn.to = b.lane;
          conn.intersection = iid;
          if (std::abs(turn) < 0.1)
            conn.cmd = Command::kGoStraight;
          else
            conn.cmd = turn > 0 ? Command::kTurnLeft : Command::kTurnRight;
          const Vec2 p0 = m.lanes[a.lane].center.points().back();
          const Vec2 p2 = m.lanes[b.lane].center.points().front();
          if (conn.cmd == Command::kGoStraight) {
            conn.path = Polyline({p0, p2});
          } else {
            // Control point at the crossing of entry/exit tangent lines.
            const Vec2 ta{std::cos(a.yaw), std::sin(a.yaw)};
            const Vec2 tb{std::cos(b.yaw), std::sin(b.yaw)};
            // Solve p0 + s*ta = p2 - t*tb.
            const double denom = ta.cross(tb);
            Vec2 ctrl = (p0 + p2) * 0.5;
            if (std::abs(denom) > 1e-9) {
              const double s = (p2 - p0).cross(tb) / denom;
              ctrl = p0 + ta * s;
            }
            conn.path = detail::bezier(p0, ctrl, p2);
          }
          isec.connection_ids.push_back(static_cast<int>(m.connections.size()));
          m.connections.push_back(conn);
        }
      }
      if (with_lights) {
        for (const auto& a : in) {
          if (a.lane < 0) continue;
          TrafficLight tl;
          tl.id = static_cast<int>(m.lights.size());
          const Vec2 entry = m.lanes[a.lane].center.points().back();
          tl.position = entry;
          tl.approach_yaw = a.yaw;
          const Vec2 nrm{-std::sin(a.yaw), std::cos(a.yaw)};
          tl.stop_line = {entry + nrm * w, entry - nrm * w};
          // East/west approaches share group 0, north/south group 1.
          tl.group = (std::abs(std::cos(a.yaw)) > 0.5) ? 0 : 1;
          m.lights.push_back(tl);
        }
      }
      m.intersections.push_back(isec);
    }
  }

  // Plain continuations between consecutive segments of the same road happen
  // through intersections only (handled above).

  // Drivable rectangles: one per road.
  for (int j = 0; j < ny; ++j)
    m.drivable.push_back({{{(x_lo + x_hi) / 2, ys[j]}, 0.0}, (x_hi - x_lo) / 2, w});
  for (int i = 0; i < nx; ++i)
    m.drivable.push_back({{{xs[i], (y_lo + y_hi) / 2}, M_PI_2}, (y_hi - y_lo) / 2, w});

  // Boundary segments (solid edges + broken centers), trimmed at crossings.
  auto trim1d = [&](double lo, double hi, const std::vector<double>& cuts_at) {
    std::vector<std::pair<double, double>> spans;
    double cur = lo;
    for (double c : cuts_at) {
      if (c - w > cur) spans.push_back({cur, c - w});
      cur = std::max(cur, c + w);
    }
    if (hi > cur) spans.push_back({cur, hi});
    return spans;
  };
  for (int j = 0; j < ny; ++j) {
    for (auto [a, b] : trim1d(x_lo, x_hi, xs)) {
      for (double e : {-w, w}) {
        m.boundaries.push_back(
            {Polyline({{a, ys[j] + e}, {b, ys[j] + e}}), BoundaryType::kSolid});
        m.walls.push_back({{a, ys[j] + e}, {b, ys[j] + e}});
      }
      m.boundaries.push_back({Polyline({{a, ys[j]}, {b, ys[j]}}), BoundaryType::kBroken});
    }
  }
  for (int i = 0; i < nx; ++i) {
    for (auto [a, b] : trim1d(y_lo, y_hi, ys)) {
      for (double e : {-w, w}) {
        m.boundaries.push_back(
            {Polyline({{xs[i] + e, a}, {xs[i] + e, b}}), BoundaryType::kSolid});
        m.walls.push_back({{xs[i] + e, a}, {xs[i] + e, b}});
      }
      m.boundaries.push_back({Polyline({{xs[i], a}, {xs[i], b}}), BoundaryType::kBroken});
    }
  }

  m.min_x = x_lo;
  m.max_x = x_hi;
  m.min_y = y_lo;
  m.max_y = y_hi;
  m.buildBitmaps();
  return m;
}

/// Build a map by id string; used by config and log metadata.
inline RoadMap byId(const std::string& id) {
  if (id == "straight") return straightRoad();
  if (id == "multilane") return multilaneRoad();
  if (id == "town3x3") return gridTown(3, 3, 70.0, 3.5, false);
  if (id == "town3x3L") return gridTown(3, 3, 70.0, 3.5, true);
  if (id == "town2x2") return gridTown(2, 2, 80.0, 3.5, false);
  throw std::invalid_argument("unknown map id: " + id);
}

}  // namespace mapgen
}  // namespace bevdrive
