#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "crossway/emission.hpp"
#include "crossway/world.hpp"

namespace crossway {

struct RewardVector {
  double r_eff = 0.0;
  double r_env = 0.0;   // <= 0
  double r_saf = 0.0;   // in {-10, -1, 0}
  double omega = 0.0;
  double r_scalar = 0.0;
};

// Piecewise speed-keeping term, averaged over vehicles. Continuous at the
// 0.8 and 1.0 breakpoints; empty vehicle set maps to 0.
inline double r_eff(const std::vector<double>& speed_ratios) {
  if (speed_ratios.empty()) return 0.0;
  double sum = 0.0;
  for (double x : speed_ratios) {
    if (x <= 0.8) {
      sum += 1.25 * x;
    } else if (x <= 1.0) {
      sum += 1.0;
    } else {
      sum += 6.0 - 5.0 * x;
    }
  }
  return sum / static_cast<double>(speed_ratios.size());
}

// Negated mean per-step CO2 of the petrol fleet; 0 when no petrol vehicles.
inline double r_env(const World& world, const EmissionModel& model) {
  double sum = 0.0;
  long n = 0;
  for (const VehicleState& veh : world.vehicles()) {
    if (veh.fuel != Fuel::Petrol) continue;
    sum += emission_rate(veh.v, veh.a_meas, model) * world.config().dt;
    ++n;
  }
  return n == 0 ? 0.0 : -sum / static_cast<double>(n);
}

// Collision dominates standstill.
inline double r_saf(const StepOutcome& outcome) {
  if (outcome.collided) return -10.0;
  if (outcome.all_standstill) return -1.0;
  return 0.0;
}

// Safety enters unscaled: it is not part of the omega trade-off.
inline double scalarize(double eff, double env, double saf, double omega) {
  if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("scalarize: omega outside [0,1]");
  return omega * eff + (1.0 - omega) * env + saf;
}

inline RewardVector compute_reward(const World& world, const StepOutcome& outcome,
                                   const EmissionModel& model, double omega) {
  RewardVector rv;
  std::vector<double> ratios;
  ratios.reserve(world.vehicles().size());
  for (const VehicleState& veh : world.vehicles()) ratios.push_back(veh.v / world.config().v_lim);
  rv.r_eff = r_eff(ratios);
  rv.r_env = r_env(world, model);
  rv.r_saf = r_saf(outcome);
  rv.omega = omega;
  rv.r_scalar = scalarize(rv.r_eff, rv.r_env, rv.r_saf, omega);
  return rv;
}

}  // namespace crossway
