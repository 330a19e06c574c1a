#pragma once

#include <algorithm>

namespace crossway {

// CO2 surrogate for petrol vehicles: idle burn plus speed and positive
// throttle terms. Electric vehicles emit nothing.
struct EmissionModel {
  double c_idle = 1.0;  // g/s
  double c_v = 0.15;    // g/m
  double c_av = 0.3;    // g*s^2/m^2, applies to positive acceleration only
};

// Emission rate in g/s; strictly increasing in v and in positive a.
inline double emission_rate(double v, double a, const EmissionModel& model) {
  return model.c_idle + model.c_v * v + model.c_av * v * std::max(a, 0.0);
}

}  // namespace crossway
