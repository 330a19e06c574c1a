#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace crossway {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {x * c, y * c}; }
  double norm() const { return std::hypot(x, y); }
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

enum class Approach { North = 0, East = 1, South = 2, West = 3 };
enum class Intent { Left = 0, Straight = 1, Right = 2 };

inline const char* to_string(Approach a) {
  switch (a) {
    case Approach::North: return "North";
    case Approach::East: return "East";
    case Approach::South: return "South";
    default: return "West";
  }
}

inline const char* to_string(Intent i) {
  switch (i) {
    case Intent::Left: return "Left";
    case Intent::Straight: return "Straight";
    default: return "Right";
  }
}

// One of the 12 approach x intent combinations.
struct RouteId {
  Approach approach = Approach::North;
  Intent intent = Intent::Straight;

  int index() const { return static_cast<int>(approach) * 3 + static_cast<int>(intent); }
  bool operator==(const RouteId&) const = default;
};

inline RouteId route_from_index(int idx) {
  return {static_cast<Approach>(idx / 3), static_cast<Intent>(idx % 3)};
}

constexpr int kRouteCount = 12;

struct RouteGeometry {
  RouteId id;
  std::vector<Vec2> polyline;
  std::vector<double> cumlen;  // cumlen[i] = arc length at polyline[i]
  double length = 0.0;

  void finalize() {
    cumlen.assign(polyline.size(), 0.0);
    for (std::size_t i = 1; i < polyline.size(); ++i) {
      cumlen[i] = cumlen[i - 1] + (polyline[i] - polyline[i - 1]).norm();
    }
    length = cumlen.empty() ? 0.0 : cumlen.back();
  }
};

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians
};

// Arc-length interpolation along the polyline. At interior vertices the
// earlier segment's heading applies.
inline Pose pose_of(const RouteGeometry& route, double s) {
  if (s < -1e-9 || s > route.length + 1e-9) {
    throw std::out_of_range("pose_of: s outside [0, length]");
  }
  s = std::max(0.0, std::min(s, route.length));
  std::size_t hi = 1;
  while (hi + 1 < route.cumlen.size() && route.cumlen[hi] < s) ++hi;
  const Vec2 a = route.polyline[hi - 1];
  const Vec2 b = route.polyline[hi];
  const double seg = route.cumlen[hi] - route.cumlen[hi - 1];
  const double t = seg > 0.0 ? (s - route.cumlen[hi - 1]) / seg : 0.0;
  const Vec2 d = b - a;
  return {a + d * t, std::atan2(d.y, d.x)};
}

// Transversal segment intersection; parallel/collinear pairs report none.
// Returns parameters (t, u) along [p1,p2] and [q1,q2].
inline std::optional<std::pair<double, double>> segment_intersection(
    const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const Vec2 d1 = p2 - p1;
  const Vec2 d2 = q2 - q1;
  const double denom = cross(d1, d2);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const Vec2 w = q1 - p1;
  const double t = cross(w, d2) / denom;
  const double u = cross(w, d1) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return std::make_pair(t, u);
}

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;  // (-pi, pi]
}

namespace intersection_layout {
// Fixed layout: 100 m approach lanes, 20 m x 20 m central box, lanes offset
// 1.75 m from the road centerline, right turn radius 6.25 m, left 13.75 m.
constexpr double kLaneLength = 100.0;
constexpr double kBoxHalf = 10.0;
constexpr double kLaneOffset = 1.75;
constexpr double kRightRadius = 6.25;
constexpr double kLeftRadius = 13.75;
}  // namespace intersection_layout

namespace detail {

// Rotation mapping the canonical South-approach frame (heading +y) onto the
// given approach.
inline Vec2 rotate_for(Approach ap, const Vec2& p) {
  switch (ap) {
    case Approach::South: return p;
    case Approach::West: return {p.y, -p.x};
    case Approach::North: return {-p.x, -p.y};
    default: return {-p.y, p.x};  // East
  }
}

inline void append_point(std::vector<Vec2>& poly, const Vec2& p) {
  if (!poly.empty() && (poly.back() - p).norm() < 1e-12) return;
  poly.push_back(p);
}

inline void append_arc(std::vector<Vec2>& poly, const Vec2& center, double radius,
                       double theta0, double theta1) {
  // Segment count chosen for chord error well below 0.5 m.
  constexpr double kMaxChordError = 0.05;
  const double max_step = 2.0 * std::acos(1.0 - kMaxChordError / radius);
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(theta1 - theta0) / max_step)));
  for (int i = 0; i <= n; ++i) {
    const double th = theta0 + (theta1 - theta0) * static_cast<double>(i) / n;
    append_point(poly, {center.x + radius * std::cos(th), center.y + radius * std::sin(th)});
  }
}

}  // namespace detail

// Builds the 12 routes of the four-way one-lane unsignalized intersection.
inline std::vector<RouteGeometry> build_route_geometries() {
  using namespace intersection_layout;
  std::vector<RouteGeometry> routes;
  routes.reserve(kRouteCount);
  const double spawn_y = -(kBoxHalf + kLaneLength);
  for (int idx = 0; idx < kRouteCount; ++idx) {
    const RouteId id = route_from_index(idx);
    std::vector<Vec2> base;
    switch (id.intent) {
      case Intent::Straight:
        base.push_back({kLaneOffset, spawn_y});
        base.push_back({kLaneOffset, kBoxHalf + kLaneLength});
        break;
      case Intent::Right: {
        // Quarter arc tangent to the approach lane and the eastbound exit.
        const double y0 = -(kLaneOffset + kRightRadius);
        base.push_back({kLaneOffset, spawn_y});
        detail::append_point(base, {kLaneOffset, y0});
        detail::append_arc(base, {kLaneOffset + kRightRadius, y0}, kRightRadius, M_PI, M_PI / 2.0);
        detail::append_point(base, {kBoxHalf + kLaneLength, -kLaneOffset});
        break;
      }
      case Intent::Left: {
        const double y0 = kLaneOffset - kLeftRadius;
        base.push_back({kLaneOffset, spawn_y});
        detail::append_point(base, {kLaneOffset, y0});
        detail::append_arc(base, {kLaneOffset - kLeftRadius, y0}, kLeftRadius, 0.0, M_PI / 2.0);
        detail::append_point(base, {-(kBoxHalf + kLaneLength), kLaneOffset});
        break;
      }
    }
    RouteGeometry geom;
    geom.id = id;
    geom.polyline.reserve(base.size());
    for (const Vec2& p : base) geom.polyline.push_back(detail::rotate_for(id.approach, p));
    geom.finalize();
    routes.push_back(std::move(geom));
  }
  return routes;
}

// Arc-length interval on each route over which the two polylines run along
// the same physical lane (collinear, co-directional overlap). Routes that
// share an approach overlap from their spawn points to the divergence point;
// routes that merge overlap from the merge point to their ends.
struct LaneOverlap {
  double a_lo = 0.0, a_hi = 0.0;  // arc-length range on route_a
  double b_lo = 0.0, b_hi = 0.0;  // arc-length range on route_b
};

inline std::optional<LaneOverlap> lane_overlap(const RouteGeometry& route_a,
                                               const RouteGeometry& route_b) {
  std::optional<LaneOverlap> best;
  for (std::size_t i = 1; i < route_a.polyline.size(); ++i) {
    const Vec2 p1 = route_a.polyline[i - 1];
    const Vec2 p2 = route_a.polyline[i];
    const Vec2 d1 = p2 - p1;
    const double l1 = d1.norm();
    for (std::size_t j = 1; j < route_b.polyline.size(); ++j) {
      const Vec2 q1 = route_b.polyline[j - 1];
      const Vec2 q2 = route_b.polyline[j];
      const Vec2 d2 = q2 - q1;
      const double l2 = d2.norm();
      // Collinear and running the same way?
      if (std::abs(cross(d1, d2)) > 1e-9 * l1 * l2) continue;
      if (d1.x * d2.x + d1.y * d2.y <= 0.0) continue;
      const Vec2 w = q1 - p1;
      if (std::abs(cross(d1, w)) > 1e-9 * l1 * std::max(1.0, w.norm())) continue;
      // Parameter range of [q1,q2] projected onto [p1,p2].
      const double t1 = (w.x * d1.x + w.y * d1.y) / (l1 * l1);
      const double t2 = ((q2 - p1).x * d1.x + (q2 - p1).y * d1.y) / (l1 * l1);
      const double lo = std::max(0.0, std::min(t1, t2));
      const double hi = std::min(1.0, std::max(t1, t2));
      if (hi - lo < 1e-9) continue;
      const double sa_lo = route_a.cumlen[i - 1] + lo * (route_a.cumlen[i] - route_a.cumlen[i - 1]);
      const double sa_hi = route_a.cumlen[i - 1] + hi * (route_a.cumlen[i] - route_a.cumlen[i - 1]);
      // Same two endpoints expressed on route_b's segment.
      const double u_lo = ((p1 + d1 * lo - q1).x * d2.x + (p1 + d1 * lo - q1).y * d2.y) / (l2 * l2);
      const double u_hi = ((p1 + d1 * hi - q1).x * d2.x + (p1 + d1 * hi - q1).y * d2.y) / (l2 * l2);
      const double sb_lo = route_b.cumlen[j - 1] + u_lo * (route_b.cumlen[j] - route_b.cumlen[j - 1]);
      const double sb_hi = route_b.cumlen[j - 1] + u_hi * (route_b.cumlen[j] - route_b.cumlen[j - 1]);
      if (!best) {
        best = LaneOverlap{sa_lo, sa_hi, sb_lo, sb_hi};
      } else {
        best->a_lo = std::min(best->a_lo, sa_lo);
        best->a_hi = std::max(best->a_hi, sa_hi);
        best->b_lo = std::min(best->b_lo, sb_lo);
        best->b_hi = std::max(best->b_hi, sb_hi);
      }
    }
  }
  return best;
}

// First geometric intersection of two route polylines, earliest along
// route_a. Returns the arc-length positions (s_a, s_b), or none.
inline std::optional<std::pair<double, double>> conflict_point(const RouteGeometry& route_a,
                                                               const RouteGeometry& route_b) {
  std::optional<std::pair<double, double>> best;
  for (std::size_t i = 1; i < route_a.polyline.size(); ++i) {
    for (std::size_t j = 1; j < route_b.polyline.size(); ++j) {
      const auto hit = segment_intersection(route_a.polyline[i - 1], route_a.polyline[i],
                                            route_b.polyline[j - 1], route_b.polyline[j]);
      if (!hit) continue;
      const double sa = route_a.cumlen[i - 1] + hit->first * (route_a.cumlen[i] - route_a.cumlen[i - 1]);
      const double sb = route_b.cumlen[j - 1] + hit->second * (route_b.cumlen[j] - route_b.cumlen[j - 1]);
      if (!best || sa < best->first) best = std::make_pair(sa, sb);
    }
  }
  return best;
}

}  // namespace crossway
