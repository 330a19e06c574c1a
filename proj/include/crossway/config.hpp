#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossway/emission.hpp"
#include "crossway/neural.hpp"
#include "crossway/td3.hpp"
#include "crossway/world.hpp"

namespace crossway {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalConfig {
  std::vector<double> omega_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  long steps_per_omega = 3000;
  double emission_cap = 2.5;  // g/s
  double speed_floor = 5.0;   // m/s
};

struct RunConfig {
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool world_trace = false;
};

struct ExperimentConfig {
  WorldConfig world;
  EmissionModel reward;
  NetConfig neural;
  TrainConfig td3;
  EvalConfig eval;
  RunConfig run;
};

namespace detail {

struct RawEntry {
  std::string value;
  int line = 0;
};

using RawConfig = std::map<std::string, std::map<std::string, RawEntry>>;

inline RawConfig parse_raw_config(std::istream& in) {
  RawConfig raw;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (raw[section].count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + section + "." + key);
    }
    raw[section][key] = {value, lineno};
  }
  return raw;
}

inline double parse_double(const std::string& path, const RawEntry& e) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (...) {
    throw ConfigError("line " + std::to_string(e.line) + ": " + path + ": not a number: " + e.value);
  }
}

inline long parse_long(const std::string& path, const RawEntry& e) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (...) {
    throw ConfigError("line " + std::to_string(e.line) + ": " + path + ": not an integer: " + e.value);
  }
}

inline bool parse_bool(const std::string& path, const RawEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError("line " + std::to_string(e.line) + ": " + path + ": not a bool: " + e.value);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& path, const RawEntry& e, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto en = item.find_last_not_of(" \t");
    if (b == std::string::npos) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + path + ": empty list item");
    }
    out.push_back(parse(path, RawEntry{item.substr(b, en - b + 1), e.line}));
  }
  if (out.empty()) {
    throw ConfigError("line " + std::to_string(e.line) + ": " + path + ": empty list");
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(const RawConfig& raw, const std::string& section) : section_(section) {
    auto it = raw.find(section);
    if (it != raw.end()) entries_ = &it->second;
  }

  void take_double(const std::string& key, double& dst) {
    if (const RawEntry* e = take(key)) dst = parse_double(section_ + "." + key, *e);
  }
  void take_long(const std::string& key, long& dst) {
    if (const RawEntry* e = take(key)) dst = parse_long(section_ + "." + key, *e);
  }
  void take_int(const std::string& key, int& dst) {
    long v = dst;
    take_long(key, v);
    dst = static_cast<int>(v);
  }
  void take_size(const std::string& key, std::size_t& dst) {
    long v = static_cast<long>(dst);
    take_long(key, v);
    if (v < 0) throw ConfigError(section_ + "." + key + ": must be >= 0");
    dst = static_cast<std::size_t>(v);
  }
  void take_bool(const std::string& key, bool& dst) {
    if (const RawEntry* e = take(key)) dst = parse_bool(section_ + "." + key, *e);
  }
  void take_string(const std::string& key, std::string& dst) {
    if (const RawEntry* e = take(key)) dst = e->value;
  }
  void take_double_list(const std::string& key, std::vector<double>& dst) {
    if (const RawEntry* e = take(key)) {
      dst = parse_list<double>(section_ + "." + key, *e, parse_double);
    }
  }
  void take_seed_list(const std::string& key, std::vector<std::uint64_t>& dst) {
    if (const RawEntry* e = take(key)) {
      auto longs = parse_list<long>(section_ + "." + key, *e, parse_long);
      dst.clear();
      for (long v : longs) dst.push_back(static_cast<std::uint64_t>(v));
    }
  }

  // Call after all take_* calls: leftover keys are unknown.
  void finish() const {
    if (!entries_) return;
    for (const auto& [key, e] : *entries_) {
      if (!taken_.count(key)) {
        throw ConfigError("line " + std::to_string(e.line) + ": unknown key " + section_ + "." + key);
      }
    }
  }

 private:
  const RawEntry* take(const std::string& key) {
    taken_.insert(key);
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }

  std::string section_;
  const std::map<std::string, RawEntry>* entries_ = nullptr;
  std::set<std::string> taken_;
};

}  // namespace detail

// Fills defaults, applies the file's values, validates every referenced type.
inline ExperimentConfig resolve_config(const detail::RawConfig& raw) {
  ExperimentConfig cfg;
  const std::set<std::string> known = {"world", "reward", "neural", "td3", "eval", "run"};
  for (const auto& [section, entries] : raw) {
    if (!known.count(section)) {
      throw ConfigError("unknown section [" + section + "]");
    }
  }

  detail::SectionReader world(raw, "world");
  world.take_double("dt", cfg.world.dt);
  world.take_double("flow_rate", cfg.world.flow_rate);
  world.take_double("v_lim", cfg.world.v_lim);
  world.take_double("a_min", cfg.world.a_min);
  world.take_double("a_max", cfg.world.a_max);
  world.take_double("electric_fraction", cfg.world.electric_fraction);
  world.take_double("collision_radius", cfg.world.collision_radius);
  world.take_double("standstill_eps", cfg.world.standstill_eps);
  world.take_int("max_vehicles", cfg.world.max_vehicles);
  world.take_long("horizon", cfg.world.horizon);
  world.finish();
  cfg.world.validate();

  detail::SectionReader reward(raw, "reward");
  reward.take_double("c_idle", cfg.reward.c_idle);
  reward.take_double("c_v", cfg.reward.c_v);
  reward.take_double("c_av", cfg.reward.c_av);
  reward.finish();
  if (cfg.reward.c_idle < 0.0 || cfg.reward.c_v < 0.0 || cfg.reward.c_av < 0.0) {
    throw ConfigError("reward coefficients must be >= 0");
  }

  detail::SectionReader neural(raw, "neural");
  neural.take_int("hidden", cfg.neural.hidden);
  neural.take_int("omega_hidden", cfg.neural.omega_hidden);
  neural.finish();
  if (cfg.neural.hidden < 1 || cfg.neural.omega_hidden < 1) {
    throw ConfigError("neural widths must be >= 1");
  }

  detail::SectionReader td3(raw, "td3");
  td3.take_double("gamma", cfg.td3.gamma);
  td3.take_double("actor_lr", cfg.td3.actor_lr);
  td3.take_double("critic_lr", cfg.td3.critic_lr);
  td3.take_double("tau", cfg.td3.tau);
  td3.take_int("policy_delay", cfg.td3.policy_delay);
  td3.take_double("target_noise_sigma", cfg.td3.target_noise_sigma);
  td3.take_double("target_noise_clip", cfg.td3.target_noise_clip);
  td3.take_double("explore_noise_sigma", cfg.td3.explore_noise_sigma);
  td3.take_int("batch_size", cfg.td3.batch_size);
  td3.take_long("warmup_steps", cfg.td3.warmup_steps);
  td3.take_long("total_steps", cfg.td3.total_steps);
  td3.take_long("eval_every", cfg.td3.eval_every);
  td3.take_long("eval_steps", cfg.td3.eval_steps);
  td3.take_size("replay_capacity", cfg.td3.replay_capacity);
  td3.finish();
  cfg.td3.validate();

  detail::SectionReader eval(raw, "eval");
  eval.take_double_list("omega_grid", cfg.eval.omega_grid);
  eval.take_long("steps_per_omega", cfg.eval.steps_per_omega);
  eval.take_double("emission_cap", cfg.eval.emission_cap);
  eval.take_double("speed_floor", cfg.eval.speed_floor);
  eval.finish();
  for (std::size_t i = 0; i < cfg.eval.omega_grid.size(); ++i) {
    const double w = cfg.eval.omega_grid[i];
    if (w < 0.0 || w > 1.0) throw ConfigError("eval.omega_grid: value outside [0,1]");
    if (i > 0 && w <= cfg.eval.omega_grid[i - 1]) {
      throw ConfigError("eval.omega_grid: values must be strictly ascending");
    }
  }
  if (!std::isfinite(cfg.eval.emission_cap) || !std::isfinite(cfg.eval.speed_floor)) {
    throw ConfigError("eval caps must be finite");
  }

  detail::SectionReader run(raw, "run");
  run.take_string("out_dir", cfg.run.out_dir);
  run.take_seed_list("seeds", cfg.run.seeds);
  run.take_bool("world_trace", cfg.run.world_trace);
  run.finish();
  if (cfg.run.seeds.empty()) throw ConfigError("run.seeds must be nonempty");

  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return resolve_config(detail::parse_raw_config(in));
}

// Loads a config file, applies `--override section.key=value` pairs, resolves.
inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  detail::RawConfig raw;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    raw = detail::parse_raw_config(in);
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    const auto dot = ov.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override must look like section.key=value: " + ov);
    }
    raw[ov.substr(0, dot)][ov.substr(dot + 1, eq - dot - 1)] = {ov.substr(eq + 1), 0};
  }
  return resolve_config(raw);
}

// Echo of the fully resolved configuration, re-parseable.
inline std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "[world]\n";
  out << "dt = " << cfg.world.dt << "\n";
  out << "flow_rate = " << cfg.world.flow_rate << "\n";
  out << "v_lim = " << cfg.world.v_lim << "\n";
  out << "a_min = " << cfg.world.a_min << "\n";
  out << "a_max = " << cfg.world.a_max << "\n";
  out << "electric_fraction = " << cfg.world.electric_fraction << "\n";
  out << "collision_radius = " << cfg.world.collision_radius << "\n";
  out << "standstill_eps = " << cfg.world.standstill_eps << "\n";
  out << "max_vehicles = " << cfg.world.max_vehicles << "\n";
  out << "horizon = " << cfg.world.horizon << "\n";
  out << "\n[reward]\n";
  out << "c_idle = " << cfg.reward.c_idle << "\n";
  out << "c_v = " << cfg.reward.c_v << "\n";
  out << "c_av = " << cfg.reward.c_av << "\n";
  out << "\n[neural]\n";
  out << "hidden = " << cfg.neural.hidden << "\n";
  out << "omega_hidden = " << cfg.neural.omega_hidden << "\n";
  out << "\n[td3]\n";
  out << "gamma = " << cfg.td3.gamma << "\n";
  out << "actor_lr = " << cfg.td3.actor_lr << "\n";
  out << "critic_lr = " << cfg.td3.critic_lr << "\n";
  out << "tau = " << cfg.td3.tau << "\n";
  out << "policy_delay = " << cfg.td3.policy_delay << "\n";
  out << "target_noise_sigma = " << cfg.td3.target_noise_sigma << "\n";
  out << "target_noise_clip = " << cfg.td3.target_noise_clip << "\n";
  out << "explore_noise_sigma = " << cfg.td3.explore_noise_sigma << "\n";
  out << "batch_size = " << cfg.td3.batch_size << "\n";
  out << "warmup_steps = " << cfg.td3.warmup_steps << "\n";
  out << "total_steps = " << cfg.td3.total_steps << "\n";
  out << "eval_every = " << cfg.td3.eval_every << "\n";
  out << "eval_steps = " << cfg.td3.eval_steps << "\n";
  out << "replay_capacity = " << cfg.td3.replay_capacity << "\n";
  out << "\n[eval]\n";
  out << "omega_grid = ";
  for (std::size_t i = 0; i < cfg.eval.omega_grid.size(); ++i) {
    out << (i ? "," : "") << cfg.eval.omega_grid[i];
  }
  out << "\n";
  out << "steps_per_omega = " << cfg.eval.steps_per_omega << "\n";
  out << "emission_cap = " << cfg.eval.emission_cap << "\n";
  out << "speed_floor = " << cfg.eval.speed_floor << "\n";
  out << "\n[run]\n";
  out << "out_dir = " << cfg.run.out_dir << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < cfg.run.seeds.size(); ++i) out << (i ? "," : "") << cfg.run.seeds[i];
  out << "\n";
  out << "world_trace = " << (cfg.run.world_trace ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace crossway
