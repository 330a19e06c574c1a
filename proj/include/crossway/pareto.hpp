#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crossway/rng.hpp"
#include "crossway/world.hpp"

namespace crossway {

// One evaluated policy setting. obj_speed is maximized, obj_emission (g/s per
// petrol vehicle-step) minimized; the maximization form negates it.
struct ParetoPoint {
  double omega = 0.0;
  double obj_speed = 0.0;     // m/s, mean over vehicle-steps
  double obj_emission = 0.0;  // g/s, mean over petrol vehicle-steps
  std::optional<double> delta_f;  // s; absent when one fleet completed no trip
  long crashes = 0;
  std::array<double, 5> vel_q{};  // q05, q25, q50, q75, q95 of per-step speeds
  std::array<double, 5> em_q{};   // same quantiles of per-step emission rates

  double emission_saving() const { return -obj_emission; }
};

enum class Direction { Maximize, Minimize };

namespace detail {

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<Direction>& dirs) {
  bool strictly = false;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const double av = dirs[k] == Direction::Maximize ? a[k] : -a[k];
    const double bv = dirs[k] == Direction::Maximize ? b[k] : -b[k];
    if (av < bv) return false;
    if (av > bv) strictly = true;
  }
  return strictly;
}

}  // namespace detail

// Indices of points not dominated by any other, input order preserved.
// Exact duplicates are all retained.
inline std::vector<std::size_t> pareto_filter(const std::vector<std::vector<double>>& points,
                                              const std::vector<Direction>& dirs) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dirs.size()) throw std::invalid_argument("pareto_filter: dim mismatch");
    bool dominated = false;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j != i && detail::dominates(points[j], points[i], dirs)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) keep.push_back(i);
  }
  return keep;
}

// 2-D hypervolume in maximization form: area of the union of rectangles
// [ref, point], by sort-and-sweep. Points not dominating the reference are
// excluded first; an empty effective front has volume 0.
inline double hypervolume(std::vector<std::pair<double, double>> front,
                          std::pair<double, double> ref) {
  std::erase_if(front, [&](const auto& p) { return p.first <= ref.first || p.second <= ref.second; });
  if (front.empty()) return 0.0;
  std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second > b.second);
  });
  double hv = 0.0;
  double max_y = ref.second;
  for (const auto& [x, y] : front) {
    if (y > max_y) {
      hv += (x - ref.first) * (y - max_y);
      max_y = y;
    }
  }
  return hv;
}

struct KMeansResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

inline KMeansResult lloyd_once(const std::vector<std::vector<double>>& pts, int k, Rng& rng) {
  const std::size_t n = pts.size();
  const std::size_t dim = pts[0].size();
  // k-means++ seeding
  std::vector<std::vector<double>> centers;
  centers.push_back(pts[rng.integer(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sq_dist(pts[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      while (pick + 1 < n && u >= d2[pick]) u -= d2[pick++];
    } else {
      pick = rng.integer(n);
    }
    centers.push_back(pts[pick]);
  }

  std::vector<int> labels(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(pts[i], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[labels[i]][d] += pts[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / counts[c];
    }
    if (!changed && iter > 0) break;
  }

  KMeansResult res;
  res.labels = std::move(labels);
  res.centroids = std::move(centers);
  for (std::size_t i = 0; i < n; ++i) res.inertia += sq_dist(pts[i], res.centroids[res.labels[i]]);
  return res;
}

}  // namespace detail

// Lloyd iterations with k-means++ seeding, best of `restarts` by inertia.
inline KMeansResult kmeans_cluster(const std::vector<std::vector<double>>& points, int k,
                                   std::uint64_t seed, int restarts = 10) {
  if (static_cast<int>(points.size()) < k) {
    throw std::invalid_argument("kmeans_cluster: fewer points than clusters");
  }
  Rng rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult cur = detail::lloyd_once(points, k, rng);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

// Mean petrol travel time minus mean electric travel time; absent when either
// fleet completed no trip.
inline std::optional<double> fairness_delta(const std::vector<std::pair<Fuel, double>>& trips) {
  double sp = 0.0, se = 0.0;
  long np = 0, ne = 0;
  for (const auto& [fuel, t] : trips) {
    if (fuel == Fuel::Petrol) {
      sp += t;
      ++np;
    } else {
      se += t;
      ++ne;
    }
  }
  if (np == 0 || ne == 0) return std::nullopt;
  return sp / np - se / ne;
}

enum class ClusterKind { EmissionSaving = 0, Balanced = 1, PerformanceBased = 2 };

inline const char* to_string(ClusterKind c) {
  switch (c) {
    case ClusterKind::EmissionSaving: return "EmissionSaving";
    case ClusterKind::PerformanceBased: return "PerformanceBased";
    default: return "Balanced";
  }
}

struct FrontReport {
  std::vector<ParetoPoint> points;
  std::vector<std::size_t> front;  // indices into points
  double hypervolume = 0.0;
  std::pair<double, double> ref_point{0.0, 0.0};  // maximization form
  std::vector<ClusterKind> front_clusters;        // parallel to front
  std::optional<std::size_t> selected;            // index into points
};

// Among feasible front points (emission cap, speed floor) the one minimizing
// |delta_f|; ties broken by larger omega, then input order. Points without a
// fairness value are excluded.
inline std::optional<std::size_t> select_policy(const FrontReport& report, double emission_cap,
                                                double speed_floor) {
  if (!std::isfinite(emission_cap) || !std::isfinite(speed_floor)) {
    throw std::invalid_argument("select_policy: caps must be finite");
  }
  std::optional<std::size_t> best;
  for (std::size_t idx : report.front) {
    const ParetoPoint& p = report.points[idx];
    if (!p.delta_f || p.obj_emission > emission_cap || p.obj_speed < speed_floor) continue;
    if (!best) {
      best = idx;
      continue;
    }
    const ParetoPoint& b = report.points[*best];
    const double pa = std::abs(*p.delta_f);
    const double ba = std::abs(*b.delta_f);
    if (pa < ba || (pa == ba && p.omega > b.omega)) best = idx;
  }
  return best;
}

// Full analysis: non-dominated filter, hypervolume against the recorded
// reference, 3-way clustering on min-max normalized objectives, selection.
inline FrontReport build_front_report(std::vector<ParetoPoint> points, double emission_cap,
                                      double speed_floor, std::uint64_t kmeans_seed) {
  FrontReport rep;
  rep.points = std::move(points);

  std::vector<std::vector<double>> objs;
  objs.reserve(rep.points.size());
  for (const ParetoPoint& p : rep.points) objs.push_back({p.obj_speed, p.obj_emission});
  rep.front = pareto_filter(objs, {Direction::Maximize, Direction::Minimize});

  double worst_emission = 0.0;
  for (const ParetoPoint& p : rep.points) worst_emission = std::max(worst_emission, p.obj_emission);
  rep.ref_point = {0.0, -1.1 * worst_emission - 1e-9};
  std::vector<std::pair<double, double>> maxform;
  for (std::size_t idx : rep.front) {
    maxform.emplace_back(rep.points[idx].obj_speed, rep.points[idx].emission_saving());
  }
  rep.hypervolume = hypervolume(maxform, rep.ref_point);

  if (rep.front.size() >= 3) {
    // min-max normalize over the front; a degenerate dimension collapses to 0
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (std::size_t idx : rep.front) {
      const double val[2] = {rep.points[idx].obj_speed, rep.points[idx].obj_emission};
      for (int d = 0; d < 2; ++d) {
        lo[d] = std::min(lo[d], val[d]);
        hi[d] = std::max(hi[d], val[d]);
      }
    }
    std::vector<std::vector<double>> norm;
    for (std::size_t idx : rep.front) {
      const double val[2] = {rep.points[idx].obj_speed, rep.points[idx].obj_emission};
      std::vector<double> row(2);
      for (int d = 0; d < 2; ++d) row[d] = hi[d] > lo[d] ? (val[d] - lo[d]) / (hi[d] - lo[d]) : 0.0;
      norm.push_back(std::move(row));
    }
    const KMeansResult km = kmeans_cluster(norm, 3, kmeans_seed);
    // Anchor labels at the omega extremes of the front.
    std::size_t lo_i = 0, hi_i = 0;
    for (std::size_t i = 1; i < rep.front.size(); ++i) {
      if (rep.points[rep.front[i]].omega < rep.points[rep.front[lo_i]].omega) lo_i = i;
      if (rep.points[rep.front[i]].omega > rep.points[rep.front[hi_i]].omega) hi_i = i;
    }
    rep.front_clusters.assign(rep.front.size(), ClusterKind::Balanced);
    for (std::size_t i = 0; i < rep.front.size(); ++i) {
      if (km.labels[i] == km.labels[lo_i]) rep.front_clusters[i] = ClusterKind::EmissionSaving;
      if (km.labels[i] == km.labels[hi_i] && km.labels[hi_i] != km.labels[lo_i]) {
        rep.front_clusters[i] = ClusterKind::PerformanceBased;
      }
    }
  } else {
    rep.front_clusters.assign(rep.front.size(), ClusterKind::Balanced);
  }

  rep.selected = select_policy(rep, emission_cap, speed_floor);
  return rep;
}

// Linear-interpolation quantiles at q05/q25/q50/q75/q95; zeros when empty.
inline std::array<double, 5> quantiles5(std::vector<double> samples) {
  std::array<double, 5> q{};
  if (samples.empty()) return q;
  std::sort(samples.begin(), samples.end());
  const double probs[5] = {0.05, 0.25, 0.5, 0.75, 0.95};
  for (int i = 0; i < 5; ++i) {
    const double pos = probs[i] * static_cast<double>(samples.size() - 1);
    const std::size_t k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    q[i] = k + 1 < samples.size() ? samples[k] * (1.0 - frac) + samples[k + 1] * frac : samples[k];
  }
  return q;
}

}  // namespace crossway
