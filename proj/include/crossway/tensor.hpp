#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossway/rng.hpp"

namespace crossway {

// Dense row-major matrix (vectors have cols == 1). The gradient buffer is
// scratch state written by Tape::backward, hence mutable.
struct Tensor {
  int rows = 0;
  int cols = 1;
  std::vector<double> v;
  mutable std::vector<double> g;

  static Tensor zeros(int rows, int cols) {
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.v.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    t.g.assign(t.v.size(), 0.0);
    return t;
  }

  static Tensor glorot(int rows, int cols, Rng& rng) {
    Tensor t = zeros(rows, cols);
    const double b = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& x : t.v) x = rng.uniform(-b, b);
    return t;
  }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  void zero_grad() const { std::fill(g.begin(), g.end(), 0.0); }
};

// Value equality; the gradient scratch buffer is not part of the comparison.
inline bool operator==(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
}

using ParamGroup = std::map<std::string, Tensor>;

inline void zero_grads(const ParamGroup& params) {
  for (const auto& [name, t] : params) t.zero_grad();
}

// Reverse-mode tape over vector-valued nodes. Nodes reference only earlier
// nodes, so the backward sweep is a plain reverse iteration. A tape may be
// differentiated once; it also doubles as the forward trace.
class Tape {
 public:
  struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
  };

  Var constant(std::vector<double> values) {
    return push(Op::Const, -1, -1, nullptr, 0.0, std::move(values));
  }

  Var scalar(double x) { return constant({x}); }

  // y = W x, gradient accumulated into W.g
  Var matvec(const Tensor& W, Var x) {
    const auto& xv = val(x);
    if (static_cast<int>(xv.size()) != W.cols) throw std::invalid_argument("matvec: shape mismatch");
    std::vector<double> y(W.rows, 0.0);
    for (int r = 0; r < W.rows; ++r) {
      double acc = 0.0;
      const double* row = W.v.data() + static_cast<std::size_t>(r) * W.cols;
      for (int c = 0; c < W.cols; ++c) acc += row[c] * xv[c];
      y[r] = acc;
    }
    return push(Op::MatVec, x.i, -1, &W, 0.0, std::move(y));
  }

  Var add(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    if (av.size() != bv.size()) throw std::invalid_argument("add: size mismatch");
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    return push(Op::Add, a.i, b.i, nullptr, 0.0, std::move(y));
  }

  Var relu(Var a) {
    std::vector<double> y = val(a);
    for (double& x : y) x = x > 0.0 ? x : 0.0;
    return push(Op::Relu, a.i, -1, nullptr, 0.0, std::move(y));
  }

  Var tanh_(Var a) {
    std::vector<double> y = val(a);
    for (double& x : y) x = std::tanh(x);
    return push(Op::Tanh, a.i, -1, nullptr, 0.0, std::move(y));
  }

  Var concat(Var a, Var b) {
    std::vector<double> y = val(a);
    const auto& bv = val(b);
    y.insert(y.end(), bv.begin(), bv.end());
    return push(Op::Concat, a.i, b.i, nullptr, 0.0, std::move(y));
  }

  Var scale(Var a, double c) {
    std::vector<double> y = val(a);
    for (double& x : y) x *= c;
    return push(Op::Scale, a.i, -1, nullptr, c, std::move(y));
  }

  Var square(Var a) {
    std::vector<double> y = val(a);
    for (double& x : y) x *= x;
    return push(Op::Square, a.i, -1, nullptr, 0.0, std::move(y));
  }

  // Elementwise mean of equally sized vars; rejects the empty list.
  Var mean(const std::vector<Var>& vars) {
    if (vars.empty()) throw std::invalid_argument("mean: empty list");
    Var acc = vars[0];
    for (std::size_t i = 1; i < vars.size(); ++i) acc = add(acc, vars[i]);
    return scale(acc, 1.0 / static_cast<double>(vars.size()));
  }

  const std::vector<double>& val(Var v) const { return nodes_[check(v)].v; }

  double scalar_val(Var v) const {
    const auto& x = val(v);
    if (x.size() != 1) throw std::invalid_argument("scalar_val: not a scalar");
    return x[0];
  }

  // Accumulates d(root)/d(param) into every referenced Tensor's grad buffer.
  // The trace is consumed; a second call is rejected.
  void backward(Var root, double seed = 1.0) {
    if (consumed_) throw std::logic_error("Tape::backward: trace already consumed");
    consumed_ = true;
    const int ri = check(root);
    for (Node& n : nodes_) n.g.assign(n.v.size(), 0.0);
    if (nodes_[ri].v.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    nodes_[ri].g[0] = seed;
    for (int i = ri; i >= 0; --i) {
      Node& n = nodes_[i];
      bool all_zero = true;
      for (double gx : n.g) {
        if (gx != 0.0) {
          all_zero = false;
          break;
        }
      }
      if (all_zero) continue;
      switch (n.op) {
        case Op::Const:
          break;
        case Op::MatVec: {
          Node& x = nodes_[n.a];
          const Tensor& W = *n.W;
          for (int r = 0; r < W.rows; ++r) {
            const double gr = n.g[r];
            if (gr == 0.0) continue;
            double* wg = W.g.data() + static_cast<std::size_t>(r) * W.cols;
            const double* wr = W.v.data() + static_cast<std::size_t>(r) * W.cols;
            for (int c = 0; c < W.cols; ++c) {
              wg[c] += gr * x.v[c];
              x.g[c] += gr * wr[c];
            }
          }
          break;
        }
        case Op::Add: {
          Node& a = nodes_[n.a];
          Node& b = nodes_[n.b];
          for (std::size_t k = 0; k < n.g.size(); ++k) {
            a.g[k] += n.g[k];
            b.g[k] += n.g[k];
          }
          break;
        }
        case Op::Relu: {
          Node& a = nodes_[n.a];
          for (std::size_t k = 0; k < n.g.size(); ++k) {
            if (a.v[k] > 0.0) a.g[k] += n.g[k];
          }
          break;
        }
        case Op::Tanh: {
          Node& a = nodes_[n.a];
          for (std::size_t k = 0; k < n.g.size(); ++k) {
            a.g[k] += n.g[k] * (1.0 - n.v[k] * n.v[k]);
          }
          break;
        }
        case Op::Concat: {
          Node& a = nodes_[n.a];
          Node& b = nodes_[n.b];
          for (std::size_t k = 0; k < a.v.size(); ++k) a.g[k] += n.g[k];
          for (std::size_t k = 0; k < b.v.size(); ++k) b.g[k] += n.g[a.v.size() + k];
          break;
        }
        case Op::Scale: {
          Node& a = nodes_[n.a];
          for (std::size_t k = 0; k < n.g.size(); ++k) a.g[k] += n.g[k] * n.c;
          break;
        }
        case Op::Square: {
          Node& a = nodes_[n.a];
          for (std::size_t k = 0; k < n.g.size(); ++k) a.g[k] += n.g[k] * 2.0 * a.v[k];
          break;
        }
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  enum class Op { Const, MatVec, Add, Relu, Tanh, Concat, Scale, Square };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    const Tensor* W = nullptr;
    double c = 0.0;
    std::vector<double> v;
    std::vector<double> g;
  };

  Var push(Op op, int a, int b, const Tensor* W, double c, std::vector<double> v) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.W = W;
    n.c = c;
    n.v = std::move(v);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  int check(Var v) const {
    if (v.i < 0 || v.i >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument("Tape: invalid var");
    }
    return v.i;
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace crossway
