#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crossway/emission.hpp"
#include "crossway/geometry.hpp"
#include "crossway/rng.hpp"

namespace crossway {

enum class Fuel { Petrol = 0, Electric = 1 };

struct VehicleState {
  int id = -1;
  RouteId route;
  double s = 0.0;       // longitudinal position along route, m
  double v = 0.0;       // m/s
  double a_meas = 0.0;  // acceleration applied at the previous step, m/s^2
  Fuel fuel = Fuel::Petrol;
  long spawn_step = 0;
};

struct WorldConfig {
  double dt = 0.1;               // s
  double flow_rate = 1200.0;     // veh/h total over all approaches
  double v_lim = 13.89;          // m/s
  double a_min = -4.5;           // m/s^2
  double a_max = 3.0;            // m/s^2
  double electric_fraction = 0.5;
  double collision_radius = 2.0;  // m
  double standstill_eps = 0.05;   // m/s
  int max_vehicles = 40;
  long horizon = 600;  // steps per episode before truncation
  std::uint64_t seed = 1;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("world.dt must be > 0");
    if (flow_rate < 0.0) throw std::invalid_argument("world.flow_rate must be >= 0");
    if (!(a_min < 0.0 && 0.0 < a_max)) throw std::invalid_argument("world: need a_min < 0 < a_max");
    if (electric_fraction < 0.0 || electric_fraction > 1.0) {
      throw std::invalid_argument("world.electric_fraction must be in [0,1]");
    }
    if (!(collision_radius > 0.0)) throw std::invalid_argument("world.collision_radius must be > 0");
  }
};

struct ExitRecord {
  int id = -1;
  double travel_time = 0.0;  // s
  Fuel fuel = Fuel::Petrol;
};

struct StepOutcome {
  bool collided = false;
  std::vector<std::pair<int, int>> collided_pairs;
  std::vector<ExitRecord> exited;
  bool all_standstill = false;
  double emissions_g = 0.0;  // total CO2 this step, petrol fleet
};

// Cache of route-pair conflict points, symmetric by construction.
class ConflictTable {
 public:
  ConflictTable() = default;

  explicit ConflictTable(const std::vector<RouteGeometry>& routes) {
    for (int a = 0; a < kRouteCount; ++a) {
      for (int b = 0; b < kRouteCount; ++b) {
        if (a == b) continue;
        table_[a][b] = conflict_point(routes[a], routes[b]);
      }
    }
  }

  const std::optional<std::pair<double, double>>& at(RouteId a, RouteId b) const {
    return table_[a.index()][b.index()];
  }

 private:
  std::array<std::array<std::optional<std::pair<double, double>>, kRouteCount>, kRouteCount> table_;
};

// Cached lane_overlap results for every ordered route pair.
class LaneOverlapTable {
 public:
  LaneOverlapTable() = default;

  explicit LaneOverlapTable(const std::vector<RouteGeometry>& routes) {
    for (int a = 0; a < kRouteCount; ++a) {
      for (int b = 0; b < kRouteCount; ++b) {
        if (a == b) continue;
        table_[a][b] = lane_overlap(routes[a], routes[b]);
      }
    }
  }

  const std::optional<LaneOverlap>& at(RouteId a, RouteId b) const {
    return table_[a.index()][b.index()];
  }

 private:
  std::array<std::array<std::optional<LaneOverlap>, kRouteCount>, kRouteCount> table_;
};

// Discrete-time microscopic simulator of the four-way intersection.
// Single-threaded; all randomness comes from the config seed.
class World {
 public:
  explicit World(const WorldConfig& cfg, const EmissionModel& emissions = {})
      : cfg_(cfg),
        emissions_(emissions),
        routes_(build_route_geometries()),
        conflicts_(routes_),
        overlaps_(routes_),
        rng_(cfg.seed) {
    cfg_.validate();
  }

  const WorldConfig& config() const { return cfg_; }
  const EmissionModel& emission_model() const { return emissions_; }
  const std::vector<RouteGeometry>& routes() const { return routes_; }
  const RouteGeometry& route(RouteId id) const { return routes_[id.index()]; }
  const ConflictTable& conflicts() const { return conflicts_; }
  const LaneOverlapTable& overlaps() const { return overlaps_; }
  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  long step_count() const { return step_count_; }

  long spawned_total() const { return spawned_total_; }
  long exited_total() const { return exited_total_; }
  long collision_removed_total() const { return collision_removed_total_; }
  long cleared_total() const { return cleared_total_; }

  // spawned = in-world + exited + collision-removed + episode-cleared
  bool conservation_ok() const {
    return spawned_total_ == static_cast<long>(vehicles_.size()) + exited_total_ +
                                 collision_removed_total_ + cleared_total_;
  }

  Pose pose(const VehicleState& veh) const { return pose_of(route(veh.route), veh.s); }

  // Bernoulli arrival with p = flow_rate*dt/3600; uniform route, fuel mix per
  // config. Suppressed when the first 8 m of the approach are occupied or the
  // world is full. Returns the vehicles spawned this call.
  std::vector<VehicleState> spawn() {
    std::vector<VehicleState> added;
    const double p = cfg_.flow_rate * cfg_.dt / 3600.0;
    if (!rng_.bernoulli(p)) return added;
    const RouteId route = route_from_index(static_cast<int>(rng_.integer(kRouteCount)));
    const Fuel fuel = rng_.bernoulli(cfg_.electric_fraction) ? Fuel::Electric : Fuel::Petrol;
    if (static_cast<int>(vehicles_.size()) >= cfg_.max_vehicles) return added;
    for (const VehicleState& veh : vehicles_) {
      if (veh.route.approach == route.approach && veh.s < 8.0) return added;
    }
    VehicleState veh;
    veh.id = next_id_++;
    veh.route = route;
    veh.s = 0.0;
    veh.v = 0.5 * cfg_.v_lim;
    veh.a_meas = 0.0;
    veh.fuel = fuel;
    veh.spawn_step = step_count_;
    vehicles_.push_back(veh);
    ++spawned_total_;
    added.push_back(veh);
    return added;
  }

  // Integrates one step under the given accelerations (clamped to the
  // configured range; ids absent from the map coast with a = 0).
  StepOutcome step(const std::unordered_map<int, double>& actions) {
    for (const auto& [id, _] : actions) {
      if (!find_vehicle(id)) throw std::invalid_argument("step: unknown vehicle id");
    }
    ++step_count_;
    StepOutcome out;
    for (VehicleState& veh : vehicles_) {
      double a = 0.0;
      if (auto it = actions.find(veh.id); it != actions.end()) a = it->second;
      a = std::clamp(a, cfg_.a_min, cfg_.a_max);
      // Exact stop-at-zero-speed branch instead of naive Euler.
      if (veh.v + a * cfg_.dt < 0.0) {
        veh.s += veh.v * veh.v / (2.0 * std::abs(a));
        veh.v = 0.0;
      } else {
        veh.s += veh.v * cfg_.dt + 0.5 * a * cfg_.dt * cfg_.dt;
        veh.v += a * cfg_.dt;
      }
      veh.a_meas = a;
      if (veh.fuel == Fuel::Petrol) {
        out.emissions_g += emission_rate(veh.v, veh.a_meas, emissions_) * cfg_.dt;
      }
    }
    // Exits
    for (auto it = vehicles_.begin(); it != vehicles_.end();) {
      if (it->s >= route(it->route).length) {
        out.exited.push_back({it->id, static_cast<double>(step_count_ - it->spawn_step) * cfg_.dt,
                              it->fuel});
        ++exited_total_;
        it = vehicles_.erase(it);
      } else {
        ++it;
      }
    }
    // Collisions, evaluated after integration; involved vehicles removed.
    out.collided_pairs = detect_collisions();
    out.collided = !out.collided_pairs.empty();
    if (out.collided) {
      std::vector<int> hit;
      for (const auto& [i, j] : out.collided_pairs) {
        hit.push_back(i);
        hit.push_back(j);
      }
      for (auto it = vehicles_.begin(); it != vehicles_.end();) {
        if (std::find(hit.begin(), hit.end(), it->id) != hit.end()) {
          ++collision_removed_total_;
          it = vehicles_.erase(it);
        } else {
          ++it;
        }
      }
    }
    out.all_standstill = !vehicles_.empty() &&
                         std::all_of(vehicles_.begin(), vehicles_.end(), [&](const VehicleState& v) {
                           return v.v < cfg_.standstill_eps;
                         });
    return out;
  }

  // Pairs (i, j), i < j, with 2D pose distance below the collision radius.
  std::vector<std::pair<int, int>> detect_collisions() const {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t a = 0; a < vehicles_.size(); ++a) {
      for (std::size_t b = a + 1; b < vehicles_.size(); ++b) {
        const Vec2 pa = pose(vehicles_[a]).position;
        const Vec2 pb = pose(vehicles_[b]).position;
        if ((pa - pb).norm() < cfg_.collision_radius) {
          const int i = std::min(vehicles_[a].id, vehicles_[b].id);
          const int j = std::max(vehicles_[a].id, vehicles_[b].id);
          pairs.emplace_back(i, j);
        }
      }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
  }

  // Removes all vehicles (fresh episode); counters keep balance.
  void reset_episode() {
    cleared_total_ += static_cast<long>(vehicles_.size());
    vehicles_.clear();
  }

  const VehicleState* find_vehicle(int id) const {
    for (const VehicleState& veh : vehicles_) {
      if (veh.id == id) return &veh;
    }
    return nullptr;
  }

  // Test hook: place a vehicle directly.
  void insert_vehicle(const VehicleState& veh) {
    vehicles_.push_back(veh);
    next_id_ = std::max(next_id_, veh.id + 1);
    ++spawned_total_;
  }

 private:
  WorldConfig cfg_;
  EmissionModel emissions_;
  std::vector<RouteGeometry> routes_;
  ConflictTable conflicts_;
  LaneOverlapTable overlaps_;
  Rng rng_;
  std::vector<VehicleState> vehicles_;
  long step_count_ = 0;
  int next_id_ = 0;
  long spawned_total_ = 0;
  long exited_total_ = 0;
  long collision_removed_total_ = 0;
  long cleared_total_ = 0;
};

}  // namespace crossway
