#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crossway/neural.hpp"
#include "crossway/pareto.hpp"
#include "crossway/reward.hpp"
#include "crossway/scene_graph.hpp"
#include "crossway/world.hpp"

namespace crossway {

struct Transition {
  SceneGraph g;
  std::vector<double> actions;  // normalized, [-1, 1]
  double reward = 0.0;
  SceneGraph g_next;  // same omega as g
  bool done = false;
};

// FIFO ring with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

  void push(Transition t) {
    if (buf_.size() < capacity_) {
      buf_.push_back(std::move(t));
    } else {
      buf_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return buf_.size(); }

  std::vector<const Transition*> sample(std::size_t n) {
    if (buf_.empty()) throw std::logic_error("ReplayBuffer::sample: empty buffer");
    std::vector<const Transition*> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = &buf_[rng_.integer(buf_.size())];
    return out;
  }

  const Transition& at(std::size_t i) const { return buf_[i]; }

 private:
  std::size_t capacity_;
  Rng rng_;
  std::vector<Transition> buf_;
  std::size_t head_ = 0;
};

struct TrainConfig {
  double gamma = 0.99;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise_sigma = 0.2;
  double target_noise_clip = 0.5;
  double explore_noise_sigma = 0.1;
  int batch_size = 256;
  long warmup_steps = 1000;
  long total_steps = 30000;
  long eval_every = 2500;
  long eval_steps = 300;  // exploit steps per omega during in-training evals
  std::size_t replay_capacity = 100000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("td3.gamma must be in [0,1)");
    if (policy_delay < 1) throw std::invalid_argument("td3.policy_delay must be >= 1");
    if (target_noise_sigma < 0.0 || target_noise_clip < 0.0 || explore_noise_sigma < 0.0) {
      throw std::invalid_argument("td3: noise scales must be >= 0");
    }
    if (batch_size < 1) throw std::invalid_argument("td3.batch_size must be >= 1");
  }
};

// Normalized action to physical acceleration.
inline double to_physical(double a, const WorldConfig& cfg) {
  return cfg.a_min + (a + 1.0) / 2.0 * (cfg.a_max - cfg.a_min);
}

// Adam with per-parameter moments, keyed by tensor name.
class Adam {
 public:
  void step(ParamGroup& params, double lr) {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    for (auto& [name, p] : params) {
      auto& [m, v] = state_[name];
      if (m.size() != p.v.size()) {
        m.assign(p.v.size(), 0.0);
        v.assign(p.v.size(), 0.0);
      }
      for (std::size_t k = 0; k < p.v.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * p.g[k];
        v[k] = b2 * v[k] + (1.0 - b2) * p.g[k] * p.g[k];
        p.v[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      }
    }
  }

  long steps() const { return t_; }

  // Serialization hooks (checkpoint round trip).
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& state() {
    return state_;
  }
  void set_steps(long t) { t_ = t; }

 private:
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> state_;
  long t_ = 0;
};

// Omega-conditioned TD3 over graph transitions: twin critics, target policy
// smoothing, delayed actor updates.
class Agent {
 public:
  Agent(const NetConfig& nc, const TrainConfig& tc)
      : nc_(nc), tc_(tc), noise_rng_(derive_seed(tc.seed, 11)) {
    tc_.validate();
    Rng init(derive_seed(tc.seed, 7));
    actor_ = make_actor_params(nc, init);
    critic1_ = make_critic_params(nc, init);
    critic2_ = make_critic_params(nc, init);
    actor_target_ = actor_;
    critic1_target_ = critic1_;
    critic2_target_ = critic2_;
  }

  const NetConfig& net_config() const { return nc_; }
  const TrainConfig& train_config() const { return tc_; }
  const ParamGroup& actor() const { return actor_; }
  ParamGroup& actor() { return actor_; }
  const ParamGroup& critic1() const { return critic1_; }
  const ParamGroup& critic2() const { return critic2_; }
  const ParamGroup& actor_target() const { return actor_target_; }
  const ParamGroup& critic1_target() const { return critic1_target_; }
  const ParamGroup& critic2_target() const { return critic2_target_; }
  long critic_updates() const { return critic_updates_; }

  std::vector<double> select_action(const SceneGraph& g, bool explore) {
    std::vector<double> a = actor_eval(actor_, g);
    if (explore) {
      for (double& x : a) {
        x = std::clamp(x + tc_.explore_noise_sigma * noise_rng_.gaussian(), -1.0, 1.0);
      }
    }
    return a;
  }

  // One TD3 critic step. The target y is computed on throwaway tapes so no
  // gradient reaches online parameters through it.
  double critic_update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
    std::vector<double> targets(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Transition& tr = *batch[b];
      double q_next = 0.0;
      if (!tr.done && tr.g_next.size() > 0) {
        Tape tt;
        std::vector<Tape::Var> avars = actor_forward(tt, actor_target_, tr.g_next);
        std::vector<double> a(avars.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double noise = std::clamp(tc_.target_noise_sigma * noise_rng_.gaussian(),
                                          -tc_.target_noise_clip, tc_.target_noise_clip);
          a[i] = std::clamp(tt.scalar_val(avars[i]) + noise, -1.0, 1.0);
        }
        Tape tq;
        const double q1 = tq.scalar_val(critic_forward(tq, critic1_target_, tr.g_next, a));
        const double q2 = tq.scalar_val(critic_forward(tq, critic2_target_, tr.g_next, a));
        q_next = std::min(q1, q2);
      }
      targets[b] = tr.reward + tc_.gamma * (tr.done ? 0.0 : 1.0) * q_next;
    }

    zero_grads(critic1_);
    zero_grads(critic2_);
    Tape t;
    std::vector<Tape::Var> terms;
    terms.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Transition& tr = *batch[b];
      Tape::Var q1 = critic_forward(t, critic1_, tr.g, tr.actions);
      Tape::Var q2 = critic_forward(t, critic2_, tr.g, tr.actions);
      Tape::Var d1 = t.square(t.add(q1, t.scalar(-targets[b])));
      Tape::Var d2 = t.square(t.add(q2, t.scalar(-targets[b])));
      terms.push_back(t.add(d1, d2));
    }
    Tape::Var loss = t.mean(terms);
    const double loss_val = t.scalar_val(loss);
    t.backward(loss);
    opt_critic1_.step(critic1_, tc_.critic_lr);
    opt_critic2_.step(critic2_, tc_.critic_lr);
    ++critic_updates_;
    return loss_val;
  }

  // Deterministic policy gradient step plus soft update of all targets.
  double actor_update(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
    zero_grads(actor_);
    zero_grads(critic1_);  // scratch; critic parameters are not stepped here
    Tape t;
    std::vector<Tape::Var> qs;
    qs.reserve(batch.size());
    for (const Transition* tr : batch) {
      std::vector<Tape::Var> avars = actor_forward(t, actor_, tr->g);
      qs.push_back(critic_forward(t, critic1_, tr->g, avars));
    }
    Tape::Var loss = t.scale(t.mean(qs), -1.0);
    const double loss_val = t.scalar_val(loss);
    t.backward(loss);
    opt_actor_.step(actor_, tc_.actor_lr);
    soft_update(actor_target_, actor_, tc_.tau);
    soft_update(critic1_target_, critic1_, tc_.tau);
    soft_update(critic2_target_, critic2_, tc_.tau);
    return loss_val;
  }

  void save(const std::string& path, long env_step) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << std::hexfloat;
    out << "crossway-checkpoint 1\n";
    out << "step " << env_step << '\n';
    out << "net " << nc_.hidden << ' ' << nc_.omega_hidden << '\n';
    auto dump_group = [&](const std::string& gname, const ParamGroup& g) {
      for (const auto& [name, tensor] : g) {
        out << "param " << gname << '/' << name << ' ' << tensor.rows << ' ' << tensor.cols << '\n';
        for (std::size_t k = 0; k < tensor.v.size(); ++k) {
          out << tensor.v[k] << (k + 1 == tensor.v.size() ? '\n' : ' ');
        }
      }
    };
    dump_group("actor", actor_);
    dump_group("critic1", critic1_);
    dump_group("critic2", critic2_);
    dump_group("actor_t", actor_target_);
    dump_group("critic1_t", critic1_target_);
    dump_group("critic2_t", critic2_target_);
    auto dump_adam = [&](const std::string& gname, const Adam& opt) {
      Adam& mut = const_cast<Adam&>(opt);
      out << "adam " << gname << ' ' << mut.steps() << '\n';
      for (const auto& [name, mv] : mut.state()) {
        out << "moments " << gname << '/' << name << ' ' << mv.first.size() << '\n';
        for (std::size_t k = 0; k < mv.first.size(); ++k) {
          out << mv.first[k] << (k + 1 == mv.first.size() ? '\n' : ' ');
        }
        for (std::size_t k = 0; k < mv.second.size(); ++k) {
          out << mv.second[k] << (k + 1 == mv.second.size() ? '\n' : ' ');
        }
      }
    };
    dump_adam("actor", opt_actor_);
    dump_adam("critic1", opt_critic1_);
    dump_adam("critic2", opt_critic2_);
    out << "critic_updates " << critic_updates_ << '\n';
  }

  // Returns the saved env step.
  long load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    // values are written as hexfloat, which stream extraction of double does
    // not accept; go through strtod instead
    std::string tok;
    auto read_double = [&](double& x) {
      if (!(in >> tok)) throw std::runtime_error("truncated checkpoint: " + path);
      char* end = nullptr;
      x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str()) throw std::runtime_error("bad checkpoint value: " + tok);
    };
    std::string tag, version;
    in >> tag >> version;
    if (tag != "crossway-checkpoint") throw std::runtime_error("bad checkpoint header: " + path);
    long env_step = 0;
    std::string word;
    in >> word >> env_step;  // step
    int h = 0, hw = 0;
    in >> word >> h >> hw;  // net
    if (h != nc_.hidden || hw != nc_.omega_hidden) {
      throw std::runtime_error("checkpoint network size mismatch");
    }
    auto group_of = [&](const std::string& gname) -> ParamGroup& {
      if (gname == "actor") return actor_;
      if (gname == "critic1") return critic1_;
      if (gname == "critic2") return critic2_;
      if (gname == "actor_t") return actor_target_;
      if (gname == "critic1_t") return critic1_target_;
      if (gname == "critic2_t") return critic2_target_;
      throw std::runtime_error("unknown checkpoint group: " + gname);
    };
    auto adam_of = [&](const std::string& gname) -> Adam& {
      if (gname == "actor") return opt_actor_;
      if (gname == "critic1") return opt_critic1_;
      return opt_critic2_;
    };
    while (in >> word) {
      if (word == "param") {
        std::string key;
        int rows = 0, cols = 0;
        in >> key >> rows >> cols;
        const auto slash = key.find('/');
        ParamGroup& g = group_of(key.substr(0, slash));
        Tensor& tensor = g.at(key.substr(slash + 1));
        if (tensor.rows != rows || tensor.cols != cols) {
          throw std::runtime_error("checkpoint shape mismatch for " + key);
        }
        for (double& x : tensor.v) read_double(x);
      } else if (word == "adam") {
        std::string gname;
        long steps = 0;
        in >> gname >> steps;
        adam_of(gname).set_steps(steps);
      } else if (word == "moments") {
        std::string key;
        std::size_t n = 0;
        in >> key >> n;
        const auto slash = key.find('/');
        auto& mv = adam_of(key.substr(0, slash)).state()[key.substr(slash + 1)];
        mv.first.resize(n);
        mv.second.resize(n);
        for (double& x : mv.first) read_double(x);
        for (double& x : mv.second) read_double(x);
      } else if (word == "critic_updates") {
        in >> critic_updates_;
      } else {
        throw std::runtime_error("unexpected checkpoint record: " + word);
      }
    }
    return env_step;
  }

 private:
  NetConfig nc_;
  TrainConfig tc_;
  ParamGroup actor_, critic1_, critic2_;
  ParamGroup actor_target_, critic1_target_, critic2_target_;
  Adam opt_actor_, opt_critic1_, opt_critic2_;
  Rng noise_rng_;
  long critic_updates_ = 0;
};

struct EvalOptions {
  std::vector<double> omega_grid;
  long steps_per_omega = 3000;
  std::uint64_t seed = 1;
  bool random_policy = false;  // baseline: uniform actions instead of the actor
};

// Exploit-only sweep over the omega grid; one ParetoPoint per omega. Crashes
// respawn a fresh episode and are counted; trips feed the fairness gap.
inline std::vector<ParetoPoint> evaluate(const ParamGroup& actor, const WorldConfig& world_cfg,
                                         const EmissionModel& emodel, const EvalOptions& opt) {
  std::vector<ParetoPoint> points;
  points.reserve(opt.omega_grid.size());
  for (std::size_t gi = 0; gi < opt.omega_grid.size(); ++gi) {
    const double omega = opt.omega_grid[gi];
    if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("evaluate: omega outside [0,1]");
    WorldConfig wc = world_cfg;
    wc.seed = derive_seed(opt.seed, 100 + gi);
    World world(wc, emodel);
    Rng random_actions(derive_seed(opt.seed, 200 + gi));

    std::vector<double> speeds, emissions;
    std::vector<std::pair<Fuel, double>> trips;
    long crashes = 0;
    long episode_steps = 0;
    double speed_sum = 0.0, emission_sum = 0.0;
    long speed_n = 0, emission_n = 0;

    for (long step = 0; step < opt.steps_per_omega; ++step) {
      world.spawn();
      const SceneGraph g = build_graph(world, omega);
      std::vector<double> a(g.size());
      if (opt.random_policy) {
        for (double& x : a) x = random_actions.uniform(-1.0, 1.0);
      } else {
        a = actor_eval(actor, g);
      }
      std::unordered_map<int, double> actions;
      for (std::size_t i = 0; i < g.size(); ++i) {
        actions[g.vertex_ids[i]] = to_physical(a[i], wc);
      }
      const StepOutcome out = world.step(actions);
      for (const VehicleState& veh : world.vehicles()) {
        speed_sum += veh.v;
        ++speed_n;
        speeds.push_back(veh.v);
        if (veh.fuel == Fuel::Petrol) {
          const double rate = emission_rate(veh.v, veh.a_meas, emodel);
          emission_sum += rate;
          ++emission_n;
          emissions.push_back(rate);
        }
      }
      for (const ExitRecord& e : out.exited) trips.emplace_back(e.fuel, e.travel_time);
      if (out.collided) {
        crashes += static_cast<long>(out.collided_pairs.size());
        world.reset_episode();
        episode_steps = 0;
      } else if (++episode_steps >= wc.horizon) {
        world.reset_episode();
        episode_steps = 0;
      }
    }

    ParetoPoint p;
    p.omega = omega;
    p.obj_speed = speed_n > 0 ? speed_sum / speed_n : 0.0;
    p.obj_emission = emission_n > 0 ? emission_sum / emission_n : 0.0;
    p.delta_f = fairness_delta(trips);
    p.crashes = crashes;
    p.vel_q = quantiles5(std::move(speeds));
    p.em_q = quantiles5(std::move(emissions));
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace crossway
