#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossway/scene_graph.hpp"
#include "crossway/tensor.hpp"

namespace crossway {

struct NetConfig {
  int hidden = 32;        // H
  int omega_hidden = 16;  // H_omega
};

inline std::string relation_weight_name(int layer, int rel) {
  return "W" + std::to_string(layer) + "_r" + std::to_string(rel);
}

namespace detail {

inline ParamGroup make_params(int vertex_in, const NetConfig& nc, Rng& rng) {
  const int H = nc.hidden;
  const int Hw = nc.omega_hidden;
  ParamGroup p;
  p["v_enc"] = Tensor::glorot(H, vertex_in, rng);
  p["e_enc"] = Tensor::glorot(H, 3, rng);  // [1/d, sin chi, cos chi]
  p["o_enc"] = Tensor::glorot(Hw, 1, rng);
  p["W1_self"] = Tensor::glorot(H, H, rng);
  p["W2_self"] = Tensor::glorot(H, H, rng);
  for (int r = 0; r < kRelationCount; ++r) {
    p[relation_weight_name(1, r)] = Tensor::glorot(H, 2 * H, rng);
    p[relation_weight_name(2, r)] = Tensor::glorot(H, H, rng);
  }
  p["ff"] = Tensor::glorot(H, H + Hw, rng);
  p["dec"] = Tensor::glorot(1, H, rng);
  return p;
}

// Shared trunk: vertex/edge/omega encoders, an edge-feature-conditioned
// relational layer, a relation-typed layer, omega concatenation and a
// feed-forward stage. Vertices without incoming edges keep only the
// self-loop term. Returns h3 per vertex.
inline std::vector<Tape::Var> trunk(Tape& t, const ParamGroup& p, const SceneGraph& g,
                                    const std::vector<Tape::Var>& vertex_inputs) {
  const std::size_t n = g.size();
  std::vector<Tape::Var> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = t.relu(t.matvec(p.at("v_enc"), vertex_inputs[i]));
  }

  // Layer 1: messages conditioned on encoded edge features, mean per relation.
  std::vector<std::vector<std::vector<Tape::Var>>> in1(n);  // [dst][rel] -> messages
  for (auto& per : in1) per.resize(kRelationCount);
  for (const SceneGraph::Edge& e : g.edges) {
    Tape::Var eh = t.relu(t.matvec(
        p.at("e_enc"), t.constant({e.feat.inv_d, std::sin(e.feat.chi), std::cos(e.feat.chi)})));
    Tape::Var m =
        t.relu(t.matvec(p.at(relation_weight_name(1, e.rel.index())), t.concat(x[e.src], eh)));
    in1[e.dst][e.rel.index()].push_back(m);
  }
  std::vector<Tape::Var> h1(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tape::Var acc = t.matvec(p.at("W1_self"), x[i]);
    for (int r = 0; r < kRelationCount; ++r) {
      if (!in1[i][r].empty()) acc = t.add(acc, t.mean(in1[i][r]));
    }
    h1[i] = t.relu(acc);
  }

  // Layer 2: relation-typed neighbor transform, mean per relation.
  std::vector<std::vector<std::vector<Tape::Var>>> in2(n);
  for (auto& per : in2) per.resize(kRelationCount);
  for (const SceneGraph::Edge& e : g.edges) {
    in2[e.dst][e.rel.index()].push_back(
        t.matvec(p.at(relation_weight_name(2, e.rel.index())), h1[e.src]));
  }
  std::vector<Tape::Var> h2(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tape::Var acc = t.matvec(p.at("W2_self"), h1[i]);
    for (int r = 0; r < kRelationCount; ++r) {
      if (!in2[i][r].empty()) acc = t.add(acc, t.mean(in2[i][r]));
    }
    h2[i] = t.relu(acc);
  }

  Tape::Var z = t.relu(t.matvec(p.at("o_enc"), t.scalar(g.omega)));
  std::vector<Tape::Var> h3(n);
  for (std::size_t i = 0; i < n; ++i) {
    h3[i] = t.relu(t.matvec(p.at("ff"), t.concat(h2[i], z)));
  }
  return h3;
}

}  // namespace detail

inline ParamGroup make_actor_params(const NetConfig& nc, Rng& rng) {
  return detail::make_params(4, nc, rng);
}

inline ParamGroup make_critic_params(const NetConfig& nc, Rng& rng) {
  return detail::make_params(5, nc, rng);
}

// Per-vertex actions in [-1, 1], ordered as the graph's vertices.
inline std::vector<Tape::Var> actor_forward(Tape& t, const ParamGroup& p, const SceneGraph& g) {
  std::vector<Tape::Var> inputs(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const VertexFeature& f = g.vertex_feats[i];
    inputs[i] = t.constant({f.s_norm, f.v_norm, f.a_norm, f.k});
  }
  std::vector<Tape::Var> h3 = detail::trunk(t, p, g, inputs);
  std::vector<Tape::Var> actions(h3.size());
  for (std::size_t i = 0; i < h3.size(); ++i) actions[i] = t.tanh_(t.matvec(p.at("dec"), h3[i]));
  return actions;
}

// Scalar state-action value: same trunk over action-augmented vertex inputs,
// mean-pooled then decoded. Empty graph values to 0. Actions enter as tape
// vars so gradients reach the actor during its update.
inline Tape::Var critic_forward(Tape& t, const ParamGroup& p, const SceneGraph& g,
                                const std::vector<Tape::Var>& actions) {
  if (actions.size() != g.size()) {
    throw std::invalid_argument("critic_forward: action count mismatch");
  }
  if (g.size() == 0) return t.scalar(0.0);
  std::vector<Tape::Var> inputs(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const VertexFeature& f = g.vertex_feats[i];
    inputs[i] = t.concat(t.constant({f.s_norm, f.v_norm, f.a_norm, f.k}), actions[i]);
  }
  std::vector<Tape::Var> h3 = detail::trunk(t, p, g, inputs);
  return t.matvec(p.at("dec"), t.mean(h3));
}

inline Tape::Var critic_forward(Tape& t, const ParamGroup& p, const SceneGraph& g,
                                const std::vector<double>& actions) {
  std::vector<Tape::Var> avars(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) avars[i] = t.constant({actions[i]});
  return critic_forward(t, p, g, avars);
}

// Non-recording convenience: evaluates the actor on a throwaway tape.
inline std::vector<double> actor_eval(const ParamGroup& p, const SceneGraph& g) {
  Tape t;
  std::vector<Tape::Var> vars = actor_forward(t, p, g);
  std::vector<double> out(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) out[i] = t.scalar_val(vars[i]);
  return out;
}

// target <- tau*online + (1-tau)*target, elementwise.
inline void soft_update(ParamGroup& target, const ParamGroup& online, double tau) {
  if (target.size() != online.size()) throw std::invalid_argument("soft_update: param sets differ");
  for (auto& [name, t] : target) {
    auto it = online.find(name);
    if (it == online.end() || it->second.v.size() != t.v.size()) {
      throw std::invalid_argument("soft_update: shape/name mismatch for " + name);
    }
    for (std::size_t k = 0; k < t.v.size(); ++k) {
      t.v[k] = tau * it->second.v[k] + (1.0 - tau) * t.v[k];
    }
  }
}

}  // namespace crossway
