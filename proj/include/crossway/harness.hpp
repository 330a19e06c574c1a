#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossway/config.hpp"
#include "crossway/pareto.hpp"
#include "crossway/td3.hpp"

namespace crossway {

// Exit codes of the `select` command.
constexpr int kExitSelected = 0;
constexpr int kExitNoFeasiblePolicy = 3;

inline std::string format_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

struct MetricsRow {
  long step = 0;
  double hypervolume = 0.0;
  long crashes = 0;
  double mean_speed = 0.0;
  double mean_emission = 0.0;
};

namespace detail {

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary);  // LF endings everywhere
  out << "step,hypervolume,crashes,mean_speed,mean_emission\n";
  for (const MetricsRow& r : rows) {
    out << r.step << ',' << format_num(r.hypervolume) << ',' << r.crashes << ','
        << format_num(r.mean_speed) << ',' << format_num(r.mean_emission) << '\n';
  }
}

inline void write_points_csv(const std::string& path, std::uint64_t seed,
                             const std::vector<ParetoPoint>& points) {
  std::ofstream out(path, std::ios::binary);
  out << "seed,omega,mean_speed,mean_emission,delta_f,crashes"
         ",v_q05,v_q25,v_q50,v_q75,v_q95,e_q05,e_q25,e_q50,e_q75,e_q95\n";
  for (const ParetoPoint& p : points) {
    out << seed << ',' << format_num(p.omega) << ',' << format_num(p.obj_speed) << ','
        << format_num(p.obj_emission) << ',' << (p.delta_f ? format_num(*p.delta_f) : "") << ','
        << p.crashes;
    for (double q : p.vel_q) out << ',' << format_num(q);
    for (double q : p.em_q) out << ',' << format_num(q);
    out << '\n';
  }
}

inline std::vector<ParetoPoint> read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ParetoPoint> points;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(16);
    ParetoPoint p;
    p.omega = std::stod(cells[1]);
    p.obj_speed = std::stod(cells[2]);
    p.obj_emission = std::stod(cells[3]);
    if (!cells[4].empty()) p.delta_f = std::stod(cells[4]);
    p.crashes = std::stol(cells[5]);
    for (int i = 0; i < 5; ++i) p.vel_q[i] = std::stod(cells[6 + i]);
    for (int i = 0; i < 5; ++i) p.em_q[i] = std::stod(cells[11 + i]);
    points.push_back(p);
  }
  return points;
}

inline std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.run.out_dir + "/seed_" + std::to_string(seed);
}

inline void echo_config(const ExperimentConfig& cfg) {
  std::ofstream out(cfg.run.out_dir + "/config_resolved.ini", std::ios::binary);
  out << render_config(cfg);
}

}  // namespace detail

// One training run: seeded world, per-step omega resampling, TD3 updates,
// periodic exploit-only evaluations. Writes metrics.csv and checkpoint.txt
// into `dir`.
inline std::vector<MetricsRow> train_run(const ExperimentConfig& cfg, std::uint64_t seed,
                                         const std::string& dir, bool resume = false) {
  std::filesystem::create_directories(dir);
  WorldConfig wc = cfg.world;
  wc.seed = derive_seed(seed, 1);
  World world(wc, cfg.reward);
  TrainConfig tc = cfg.td3;
  tc.seed = derive_seed(seed, 2);
  Agent agent(cfg.neural, tc);
  ReplayBuffer buffer(tc.replay_capacity, derive_seed(seed, 3));
  Rng omega_rng(derive_seed(seed, 4));
  Rng warmup_rng(derive_seed(seed, 5));

  const std::string checkpoint_path = dir + "/checkpoint.txt";
  long start_step = 0;
  if (resume && std::filesystem::exists(checkpoint_path)) {
    start_step = agent.load(checkpoint_path);
  }

  std::ofstream trace;
  if (cfg.run.world_trace) {
    trace.open(dir + "/trace.csv", std::ios::binary);
    trace << "step,vehicle_id,route,fuel,s,v,a,collided\n";
  }

  std::vector<MetricsRow> metrics;
  long episode_steps = 0;
  int eval_index = 0;
  for (long step = start_step + 1; step <= tc.total_steps; ++step) {
    world.spawn();
    const double omega = omega_rng.uniform();
    const SceneGraph g = build_graph(world, omega);

    std::vector<double> a(g.size());
    if (step <= tc.warmup_steps) {
      for (double& x : a) x = warmup_rng.uniform(-1.0, 1.0);
    } else {
      a = agent.select_action(g, /*explore=*/true);
    }
    std::unordered_map<int, double> actions;
    for (std::size_t i = 0; i < g.size(); ++i) actions[g.vertex_ids[i]] = to_physical(a[i], wc);

    const StepOutcome outcome = world.step(actions);
    const RewardVector rv = compute_reward(world, outcome, cfg.reward, omega);
    const SceneGraph g_next = build_graph(world, omega);
    buffer.push({g, a, rv.r_scalar, g_next, outcome.collided});

    if (trace.is_open()) {
      for (const VehicleState& veh : world.vehicles()) {
        trace << step << ',' << veh.id << ',' << to_string(veh.route.approach) << '-'
              << to_string(veh.route.intent) << ',' << (veh.fuel == Fuel::Electric ? 'e' : 'p')
              << ',' << format_num(veh.s) << ',' << format_num(veh.v) << ','
              << format_num(veh.a_meas) << ',' << (outcome.collided ? 1 : 0) << '\n';
      }
    }

    if (outcome.collided) {
      world.reset_episode();  // training episodes end on first collision
      episode_steps = 0;
    } else if (++episode_steps >= wc.horizon) {
      world.reset_episode();
      episode_steps = 0;
    }

    if (step > tc.warmup_steps && buffer.size() >= static_cast<std::size_t>(tc.batch_size)) {
      const auto batch = buffer.sample(static_cast<std::size_t>(tc.batch_size));
      agent.critic_update(batch);
      if (step % tc.policy_delay == 0) agent.actor_update(batch);
    }

    if (tc.eval_every > 0 && step % tc.eval_every == 0) {
      EvalOptions eopt;
      eopt.omega_grid = cfg.eval.omega_grid;
      eopt.steps_per_omega = tc.eval_steps;
      eopt.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(eval_index++));
      const std::vector<ParetoPoint> pts = evaluate(agent.actor(), cfg.world, cfg.reward, eopt);
      const FrontReport rep =
          build_front_report(pts, cfg.eval.emission_cap, cfg.eval.speed_floor, seed);
      MetricsRow row;
      row.step = step;
      row.hypervolume = rep.hypervolume;
      for (const ParetoPoint& p : pts) {
        row.crashes += p.crashes;
        row.mean_speed += p.obj_speed / static_cast<double>(pts.size());
        row.mean_emission += p.obj_emission / static_cast<double>(pts.size());
      }
      metrics.push_back(row);
    }
  }

  agent.save(checkpoint_path, tc.total_steps);
  detail::write_metrics_csv(dir + "/metrics.csv", metrics);
  return metrics;
}

inline int cmd_train(const ExperimentConfig& cfg, bool resume) {
  std::filesystem::create_directories(cfg.run.out_dir);
  detail::echo_config(cfg);
  for (std::uint64_t seed : cfg.run.seeds) {
    train_run(cfg, seed, detail::seed_dir(cfg, seed), resume);
    std::cout << "trained seed " << seed << "\n";
  }
  return 0;
}

inline int cmd_eval(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.run.out_dir);
  detail::echo_config(cfg);
  for (std::uint64_t seed : cfg.run.seeds) {
    const std::string dir = detail::seed_dir(cfg, seed);
    const std::string checkpoint_path = dir + "/checkpoint.txt";
    if (!std::filesystem::exists(checkpoint_path)) {
      throw std::runtime_error("missing checkpoint for seed " + std::to_string(seed) + ": " +
                               checkpoint_path);
    }
    TrainConfig tc = cfg.td3;
    tc.seed = derive_seed(seed, 2);
    Agent agent(cfg.neural, tc);
    agent.load(checkpoint_path);
    EvalOptions eopt;
    eopt.omega_grid = cfg.eval.omega_grid;
    eopt.steps_per_omega = cfg.eval.steps_per_omega;
    eopt.seed = derive_seed(seed, 9000);
    const std::vector<ParetoPoint> pts = evaluate(agent.actor(), cfg.world, cfg.reward, eopt);
    detail::write_points_csv(dir + "/points.csv", seed, pts);
    std::cout << "evaluated seed " << seed << "\n";
  }
  return 0;
}

struct AggregatedPoint {
  ParetoPoint mean;      // per-omega mean over seeds
  double speed_ci = 0.0;  // 95% normal-approximation half-widths
  double emission_ci = 0.0;
  double delta_f_ci = 0.0;
};

// Per-omega aggregation across seeds: means plus 95% half-widths
// (1.96 * sd / sqrt(n), sample standard deviation).
inline std::vector<AggregatedPoint> aggregate_points(
    const std::vector<std::vector<ParetoPoint>>& per_seed) {
  if (per_seed.empty()) return {};
  const std::size_t m = per_seed.front().size();
  std::vector<AggregatedPoint> out(m);
  auto ci95 = [](const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return 1.96 * std::sqrt(var / static_cast<double>(xs.size()));
  };
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> speeds, emissions, deltas;
    AggregatedPoint agg;
    agg.mean.omega = per_seed.front()[i].omega;
    for (const auto& pts : per_seed) {
      const ParetoPoint& p = pts.at(i);
      speeds.push_back(p.obj_speed);
      emissions.push_back(p.obj_emission);
      if (p.delta_f) deltas.push_back(*p.delta_f);
      agg.mean.crashes += p.crashes;
      for (int q = 0; q < 5; ++q) {
        agg.mean.vel_q[q] += p.vel_q[q] / static_cast<double>(per_seed.size());
        agg.mean.em_q[q] += p.em_q[q] / static_cast<double>(per_seed.size());
      }
    }
    for (double s : speeds) agg.mean.obj_speed += s / static_cast<double>(speeds.size());
    for (double e : emissions) agg.mean.obj_emission += e / static_cast<double>(emissions.size());
    if (!deltas.empty()) {
      double d = 0.0;
      for (double x : deltas) d += x;
      agg.mean.delta_f = d / static_cast<double>(deltas.size());
      agg.delta_f_ci = ci95(deltas);
    }
    agg.speed_ci = ci95(speeds);
    agg.emission_ci = ci95(emissions);
    out[i] = agg;
  }
  return out;
}

inline nlohmann::json report_to_json(const FrontReport& rep,
                                     const std::vector<AggregatedPoint>& aggs) {
  nlohmann::json j;
  j["points"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const ParetoPoint& p = rep.points[i];
    nlohmann::json jp;
    jp["omega"] = p.omega;
    jp["mean_speed"] = p.obj_speed;
    jp["mean_emission"] = p.obj_emission;
    if (p.delta_f) {
      jp["delta_f"] = *p.delta_f;
    } else {
      jp["delta_f"] = nullptr;
    }
    jp["crashes"] = p.crashes;
    jp["vel_quantiles"] = p.vel_q;
    jp["em_quantiles"] = p.em_q;
    if (i < aggs.size()) {
      jp["speed_ci95"] = aggs[i].speed_ci;
      jp["emission_ci95"] = aggs[i].emission_ci;
      jp["delta_f_ci95"] = aggs[i].delta_f_ci;
    }
    j["points"].push_back(jp);
  }
  j["front"] = rep.front;
  j["hypervolume"] = rep.hypervolume;
  j["ref_point"] = {rep.ref_point.first, rep.ref_point.second};
  j["clusters"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.front.size(); ++i) {
    j["clusters"].push_back(
        {{"omega", rep.points[rep.front[i]].omega}, {"cluster", to_string(rep.front_clusters[i])}});
  }
  if (rep.selected) {
    j["selected"] = *rep.selected;
  } else {
    j["selected"] = nullptr;
  }
  return j;
}

inline FrontReport report_from_json(const nlohmann::json& j) {
  FrontReport rep;
  for (const auto& jp : j.at("points")) {
    ParetoPoint p;
    p.omega = jp.at("omega").get<double>();
    p.obj_speed = jp.at("mean_speed").get<double>();
    p.obj_emission = jp.at("mean_emission").get<double>();
    if (!jp.at("delta_f").is_null()) p.delta_f = jp.at("delta_f").get<double>();
    p.crashes = jp.at("crashes").get<long>();
    for (int q = 0; q < 5; ++q) {
      p.vel_q[q] = jp.at("vel_quantiles").at(q).get<double>();
      p.em_q[q] = jp.at("em_quantiles").at(q).get<double>();
    }
    rep.points.push_back(p);
  }
  rep.front = j.at("front").get<std::vector<std::size_t>>();
  rep.hypervolume = j.at("hypervolume").get<double>();
  rep.ref_point = {j.at("ref_point").at(0).get<double>(), j.at("ref_point").at(1).get<double>()};
  rep.front_clusters.assign(rep.front.size(), ClusterKind::Balanced);
  for (std::size_t i = 0; i < rep.front.size() && i < j.at("clusters").size(); ++i) {
    const std::string name = j.at("clusters").at(i).at("cluster").get<std::string>();
    if (name == "EmissionSaving") rep.front_clusters[i] = ClusterKind::EmissionSaving;
    if (name == "PerformanceBased") rep.front_clusters[i] = ClusterKind::PerformanceBased;
  }
  if (!j.at("selected").is_null()) rep.selected = j.at("selected").get<std::size_t>();
  return rep;
}

inline int cmd_analyze(const ExperimentConfig& cfg) {
  std::vector<std::vector<ParetoPoint>> per_seed;
  for (std::uint64_t seed : cfg.run.seeds) {
    per_seed.push_back(detail::read_points_csv(detail::seed_dir(cfg, seed) + "/points.csv"));
  }
  const std::vector<AggregatedPoint> aggs = aggregate_points(per_seed);
  std::vector<ParetoPoint> points;
  for (const AggregatedPoint& a : aggs) points.push_back(a.mean);
  const FrontReport rep = build_front_report(points, cfg.eval.emission_cap, cfg.eval.speed_floor,
                                             cfg.run.seeds.front());

  std::filesystem::create_directories(cfg.run.out_dir);
  detail::echo_config(cfg);
  {
    std::ofstream out(cfg.run.out_dir + "/report.json", std::ios::binary);
    out << report_to_json(rep, aggs).dump(2) << '\n';
  }
  {
    std::ofstream out(cfg.run.out_dir + "/front.csv", std::ios::binary);
    out << "omega,speed,emission,cluster\n";
    for (std::size_t i = 0; i < rep.front.size(); ++i) {
      const ParetoPoint& p = rep.points[rep.front[i]];
      out << format_num(p.omega) << ',' << format_num(p.obj_speed) << ','
          << format_num(p.obj_emission) << ',' << to_string(rep.front_clusters[i]) << '\n';
    }
  }
  {
    std::ofstream out(cfg.run.out_dir + "/fairness.csv", std::ios::binary);
    out << "omega,delta_f,ci95\n";
    for (const AggregatedPoint& a : aggs) {
      out << format_num(a.mean.omega) << ','
          << (a.mean.delta_f ? format_num(*a.mean.delta_f) : "") << ','
          << format_num(a.delta_f_ci) << '\n';
    }
  }
  {
    std::ofstream out(cfg.run.out_dir + "/boxstats.csv", std::ios::binary);
    out << "omega,v_q05,v_q25,v_q50,v_q75,v_q95,e_q05,e_q25,e_q50,e_q75,e_q95\n";
    for (const AggregatedPoint& a : aggs) {
      out << format_num(a.mean.omega);
      for (double q : a.mean.vel_q) out << ',' << format_num(q);
      for (double q : a.mean.em_q) out << ',' << format_num(q);
      out << '\n';
    }
  }
  std::cout << "front size " << rep.front.size() << ", hypervolume " << rep.hypervolume << "\n";
  return 0;
}

inline int cmd_select(const ExperimentConfig& cfg) {
  std::ifstream in(cfg.run.out_dir + "/report.json");
  if (!in) throw std::runtime_error("missing report.json; run analyze first");
  nlohmann::json j;
  in >> j;
  FrontReport rep = report_from_json(j);
  const std::optional<std::size_t> pick =
      select_policy(rep, cfg.eval.emission_cap, cfg.eval.speed_floor);
  if (!pick) {
    std::cout << "no feasible policy (emission_cap=" << cfg.eval.emission_cap
              << ", speed_floor=" << cfg.eval.speed_floor << ")\n";
    return kExitNoFeasiblePolicy;
  }
  const ParetoPoint& p = rep.points[*pick];
  std::cout << "selected omega=" << p.omega << " speed=" << p.obj_speed
            << " emission=" << p.obj_emission << " delta_f=" << (p.delta_f ? *p.delta_f : 0.0)
            << " crashes=" << p.crashes << "\n";
  return kExitSelected;
}

}  // namespace crossway
