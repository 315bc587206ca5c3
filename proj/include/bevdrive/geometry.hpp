#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace bevdrive {

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squaredNorm() const { return x * x + y * y; }
  Vec2 normalized() const {
    const double n = norm();
    return n > 1e-12 ? Vec2{x / n, y / n} : Vec2{0, 0};
  }
  Vec2 rotated(double a) const {
    const double c = std::cos(a), s = std::sin(a);
    return {c * x - s * y, s * x + c * y};
  }
};

/// Wrap an angle to (-pi, pi].
inline double wrapAngle(double a) {
  constexpr double kTwoPi = 6.283185307179586;
  a = std::fmod(a, kTwoPi);
  if (a <= -3.141592653589793) a += kTwoPi;
  if (a > 3.141592653589793) a -= kTwoPi;
  return a;
}

/// Planar pose; +x forward in the local frame, positive yaw turns left (CCW).
struct Pose2 {
  Vec2 p;
  double yaw = 0.0;

  Vec2 toWorld(const Vec2& local) const { return p + local.rotated(yaw); }
  Vec2 toLocal(const Vec2& world) const { return (world - p).rotated(-yaw); }
  Pose2 toLocalPose(const Pose2& world) const {
    return {toLocal(world.p), wrapAngle(world.yaw - yaw)};
  }
  Pose2 toWorldPose(const Pose2& local) const {
    return {toWorld(local.p), wrapAngle(local.yaw + yaw)};
  }
  Vec2 heading() const { return {std::cos(yaw), std::sin(yaw)}; }
};

/// Oriented rectangle: center pose plus half extents (hl along +x, hw along +y).
struct OrientedRect {
  Pose2 pose;
  double hl = 1.0, hw = 0.5;

  std::array<Vec2, 4> corners() const {
    return {pose.toWorld({hl, hw}), pose.toWorld({-hl, hw}), pose.toWorld({-hl, -hw}),
            pose.toWorld({hl, -hw})};
  }

  bool contains(const Vec2& w) const {
    const Vec2 l = pose.toLocal(w);
    return std::abs(l.x) <= hl && std::abs(l.y) <= hw;
  }
};

/// Separating-axis overlap test for two oriented rectangles.
inline bool rectsOverlap(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners(), cb = b.corners();
  const auto axes = {a.pose.heading(), Vec2{-std::sin(a.pose.yaw), std::cos(a.pose.yaw)},
                     b.pose.heading(), Vec2{-std::sin(b.pose.yaw), std::cos(b.pose.yaw)}};
  for (const Vec2& ax : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const auto& c : ca) {
      const double d = c.dot(ax);
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (const auto& c : cb) {
      const double d = c.dot(ax);
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

struct Segment {
  Vec2 a, b;
};

/// Proper + touching segment intersection.
inline bool segmentsIntersect(const Segment& s1, const Segment& s2) {
  const Vec2 r = s1.b - s1.a, s = s2.b - s2.a;
  const double denom = r.cross(s);
  const Vec2 qp = s2.a - s1.a;
  if (std::abs(denom) < 1e-15) {
    if (std::abs(qp.cross(r)) > 1e-12) return false;  // parallel, not collinear
    const double rr = r.dot(r);
    if (rr < 1e-15) return (qp.norm() < 1e-12);
    const double t0 = qp.dot(r) / rr, t1 = t0 + s.dot(r) / rr;
    return std::max(std::min(t0, t1), 0.0) <= std::min(std::max(t0, t1), 1.0);
  }
  const double t = qp.cross(s) / denom;
  const double u = qp.cross(r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

/// Ray-segment hit distance along the ray direction (unit dir), if any.
inline std::optional<double> raySegment(const Vec2& origin, const Vec2& dir,
                                        const Segment& seg) {
  const Vec2 v = seg.b - seg.a;
  const double denom = dir.cross(v);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 d = seg.a - origin;
  const double t = d.cross(v) / denom;   // distance along ray
  const double u = d.cross(dir) / denom; // parameter on segment
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return std::nullopt;
}

/// First hit of a ray against an oriented rectangle boundary.
inline std::optional<double> rayRect(const Vec2& origin, const Vec2& dir,
                                     const OrientedRect& r) {
  const auto c = r.corners();
  std::optional<double> best;
  for (int i = 0; i < 4; ++i) {
    auto t = raySegment(origin, dir, {c[i], c[(i + 1) % 4]});
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

/// Polyline with cached cumulative arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) { rebuild(); }

  const std::vector<Vec2>& points() const { return pts_; }
  bool empty() const { return pts_.size() < 2; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }

  void append(const Vec2& p) {
    pts_.push_back(p);
    rebuild();
  }

  /// Point at arc length s (clamped to [0, length]).
  Vec2 sample(double s) const {
    if (pts_.empty()) return {};
    if (pts_.size() == 1 || s <= 0.0) return pts_.front();
    if (s >= length()) return pts_.back();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    const double s0 = cum_[i - 1];
    const double seg = cum_[i] - s0;
    const double t = seg > 1e-12 ? (s - s0) / seg : 0.0;
    return pts_[i - 1] + (pts_[i] - pts_[i - 1]) * t;
  }

  /// Tangent direction at arc length s.
  Vec2 tangent(double s) const {
    if (pts_.size() < 2) return {1, 0};
    std::size_t i = segmentIndex(s);
    return (pts_[i + 1] - pts_[i]).normalized();
  }

  /// Arc length of the closest point on the polyline to w.
  double project(const Vec2& w) const {
    double best_d2 = 1e300, best_s = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const Vec2 d = pts_[i + 1] - pts_[i];
      const double len2 = d.squaredNorm();
      double t = len2 > 1e-12 ? (w - pts_[i]).dot(d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 q = pts_[i] + d * t;
      const double d2 = (w - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best_s = cum_[i] + std::sqrt(len2) * t;
      }
    }
    return best_s;
  }

  double distanceTo(const Vec2& w) const { return (w - sample(project(w))).norm(); }

 private:
  std::size_t segmentIndex(double s) const {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), std::clamp(s, 0.0, length()));
    std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    if (i == 0) i = 1;
    if (i >= pts_.size()) i = pts_.size() - 1;
    return i - 1;
  }

  void rebuild() {
    cum_.assign(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i)
      cum_[i] = cum_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
  }

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

}  // namespace bevdrive
