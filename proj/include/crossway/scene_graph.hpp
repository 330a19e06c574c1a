#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossway/world.hpp"

namespace crossway {

enum class Rel { SameLane = 0, Crossing = 1 };
enum class FuelPair { pp = 0, pe = 1, ep = 2, ee = 3 };

constexpr int kRelationCount = 8;  // {SameLane, Crossing} x {pp, pe, ep, ee}

struct EdgeRelation {
  Rel rel = Rel::SameLane;
  FuelPair fuel_pair = FuelPair::pp;

  int index() const { return static_cast<int>(rel) * 4 + static_cast<int>(fuel_pair); }
  bool operator==(const EdgeRelation&) const = default;
};

// Source fuel letter first.
inline FuelPair fuel_pair_of(Fuel src, Fuel dst) {
  const int s = src == Fuel::Electric ? 1 : 0;
  const int d = dst == Fuel::Electric ? 1 : 0;
  return static_cast<FuelPair>(s * 2 + d);
}

struct EdgeFeature {
  double inv_d = 0.0;  // 1/m
  double chi = 0.0;    // bearing of source as seen from destination, (-pi, pi]
};

struct VertexFeature {
  double s_norm = 0.0;
  double v_norm = 0.0;
  double a_norm = 0.0;
  double k = 0.0;  // 0 petrol, 1 electric
};

struct SceneGraph {
  struct Edge {
    int src = 0;  // index into vertex_ids
    int dst = 0;
    EdgeRelation rel;
    EdgeFeature feat;
  };

  std::vector<int> vertex_ids;  // ascending vehicle id
  std::vector<VertexFeature> vertex_feats;
  std::vector<Edge> edges;
  double omega = 0.0;

  std::size_t size() const { return vertex_ids.size(); }
};

// Crossing gap floor.
constexpr double kMinEdgeDistance = 0.1;

// True when both vehicles currently sit on a lane segment their routes share
// (same approach before diverging, or same exit after merging).
inline bool on_shared_lane(const World& world, const VehicleState& a, const VehicleState& b) {
  if (a.route == b.route) return true;
  const auto& ov = world.overlaps().at(a.route, b.route);
  return ov && a.s >= ov->a_lo && a.s <= ov->a_hi && b.s >= ov->b_lo && b.s <= ov->b_hi;
}

// Longitudinal gap along the common lane, positive when a leads b. Only
// meaningful when on_shared_lane(a, b) holds.
inline double lane_gap(const World& world, const VehicleState& a, const VehicleState& b) {
  if (a.route == b.route) return a.s - b.s;
  const auto& ov = world.overlaps().at(a.route, b.route);
  return (ov->b_hi - b.s) - (ov->a_hi - a.s);
}

// Distance measure between two vehicles joined by an edge: gap along the lane
// when they occupy the same physical lane, mean remaining distance to the
// shared conflict point for crossing pairs (floored).
inline double edge_distance(const World& world, const VehicleState& a, const VehicleState& b) {
  if (on_shared_lane(world, a, b)) {
    return std::max(a.route == b.route ? 0.0 : kMinEdgeDistance,
                    std::abs(lane_gap(world, a, b)));
  }
  const auto& cp = world.conflicts().at(a.route, b.route);
  if (!cp) throw std::logic_error("edge_distance: no conflict point between routes");
  const double remaining = (cp->first - a.s) + (cp->second - b.s);
  return std::max(kMinEdgeDistance, remaining / 2.0);
}

// Direction of vehicle i as seen from vehicle j's heading frame.
inline double bearing_angle(const World& world, const VehicleState& i, const VehicleState& j) {
  const Pose pi = world.pose(i);
  const Pose pj = world.pose(j);
  const Vec2 d = pi.position - pj.position;
  return wrap_angle(std::atan2(d.y, d.x) - pj.heading);
}

inline VertexFeature vertex_feature_of(const World& world, const VehicleState& veh) {
  const WorldConfig& cfg = world.config();
  VertexFeature f;
  f.s_norm = veh.s / world.route(veh.route).length;
  f.v_norm = veh.v / cfg.v_lim;
  f.a_norm = veh.a_meas >= 0.0 ? veh.a_meas / cfg.a_max : veh.a_meas / std::abs(cfg.a_min);
  f.k = veh.fuel == Fuel::Electric ? 1.0 : 0.0;
  return f;
}

// Typed-graph observation of the current world state. Same-lane edges link
// each follower to its nearest leader on the same physical lane (same route,
// or a different route while both sit on a lane segment the routes share),
// directed leader -> follower with the longitudinal gap as distance. Crossing
// edges are added in both directions between vehicles on different lanes
// while both are still short of their shared conflict point.
inline SceneGraph build_graph(const World& world, double omega) {
  if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("build_graph: omega outside [0,1]");
  SceneGraph g;
  g.omega = omega;

  std::vector<const VehicleState*> order;
  order.reserve(world.vehicles().size());
  for (const VehicleState& veh : world.vehicles()) order.push_back(&veh);
  std::sort(order.begin(), order.end(),
            [](const VehicleState* a, const VehicleState* b) { return a->id < b->id; });

  std::map<int, int> index_of;
  for (const VehicleState* veh : order) {
    index_of[veh->id] = static_cast<int>(g.vertex_ids.size());
    g.vertex_ids.push_back(veh->id);
    g.vertex_feats.push_back(vertex_feature_of(world, *veh));
  }

  auto add_edge = [&](const VehicleState& src, const VehicleState& dst, Rel rel) {
    SceneGraph::Edge e;
    e.src = index_of[src.id];
    e.dst = index_of[dst.id];
    e.rel = {rel, fuel_pair_of(src.fuel, dst.fuel)};
    e.feat.inv_d = 1.0 / edge_distance(world, src, dst);
    e.feat.chi = bearing_angle(world, src, dst);
    g.edges.push_back(e);
  };

  // Same-lane: each follower links to its nearest leader on its current lane.
  for (const VehicleState* follower : order) {
    const VehicleState* leader = nullptr;
    double best_gap = 0.0;
    for (const VehicleState* cand : order) {
      if (cand->id == follower->id || !on_shared_lane(world, *cand, *follower)) continue;
      const double gap = lane_gap(world, *cand, *follower);
      if (gap <= 0.0) continue;
      if (!leader || gap < best_gap || (gap == best_gap && cand->id < leader->id)) {
        leader = cand;
        best_gap = gap;
      }
    }
    if (leader) add_edge(*leader, *follower, Rel::SameLane);
  }

  // Crossing: vehicles on different lanes, bidirectional while the conflict
  // point lies ahead of both.
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const VehicleState& va = *order[a];
      const VehicleState& vb = *order[b];
      if (va.route == vb.route || on_shared_lane(world, va, vb)) continue;
      const auto& cp = world.conflicts().at(va.route, vb.route);
      if (cp && va.s < cp->first && vb.s < cp->second) {
        add_edge(va, vb, Rel::Crossing);
        add_edge(vb, va, Rel::Crossing);
      }
    }
  }
  return g;
}

// Line-oriented text serialization for golden-file tests.
inline std::string serialize_graph(const SceneGraph& g) {
  auto num = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  std::ostringstream out;
  out << g.vertex_ids.size() << ' ' << g.edges.size() << ' ' << num(g.omega) << '\n';
  for (std::size_t i = 0; i < g.vertex_ids.size(); ++i) {
    const VertexFeature& f = g.vertex_feats[i];
    out << g.vertex_ids[i] << ' ' << num(f.s_norm) << ' ' << num(f.v_norm) << ' ' << num(f.a_norm)
        << ' ' << static_cast<int>(f.k) << '\n';
  }
  std::vector<SceneGraph::Edge> edges = g.edges;
  std::sort(edges.begin(), edges.end(), [](const SceneGraph::Edge& a, const SceneGraph::Edge& b) {
    return std::tie(a.src, a.dst, a.rel.rel, a.rel.fuel_pair) <
           std::tie(b.src, b.dst, b.rel.rel, b.rel.fuel_pair);
  });
  for (const SceneGraph::Edge& e : edges) {
    out << e.src << ' ' << e.dst << ' ' << static_cast<int>(e.rel.rel) << ' '
        << static_cast<int>(e.rel.fuel_pair) << ' ' << num(e.feat.inv_d) << ' ' << num(e.feat.chi)
        << '\n';
  }
  return out.str();
}

}  // namespace crossway
