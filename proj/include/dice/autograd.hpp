// Reverse-mode gradient tape over Tensor2 values. One tape records one
// forward pass; nodes are appended after their inputs, so walking ids in
// reverse is reverse topological order. Adjoints of nodes the root never
// touched stay zero.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dice/common.hpp"
#include "dice/stats.hpp"
#include "dice/tensor.hpp"

namespace dice::ad {

struct Var {
  int id = -1;
};

class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  Var leaf(Tensor2 v) { return push(std::move(v), nullptr); }

  const Tensor2& val(Var v) const { return nodes_[v.id].value; }
  const Tensor2& grad(Var v) const { return nodes_[v.id].grad; }

  int size() const { return static_cast<int>(nodes_.size()); }

  // ---- ops -------------------------------------------------------------

  Var matmul(Var a, Var b) {
    Tensor2 out = dice::matmul(val(a), val(b));
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
      t.add_matmul(a, g, transpose(t.val(b)));
      t.add_matmul(b, transpose(t.val(a)), g);
    });
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Tensor2 out = val(a);
    const Tensor2& vb = val(b);
    for (int i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
      t.accumulate(a, g, 1.0);
      t.accumulate(b, g, 1.0);
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Tensor2 out = val(a);
    const Tensor2& vb = val(b);
    for (int i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
      t.accumulate(a, g, 1.0);
      t.accumulate(b, g, -1.0);
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Tensor2 out = val(a);
    const Tensor2& vb = val(b);
    for (int i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
      t.accumulate_had(a, g, t.val(b));
      t.accumulate_had(b, g, t.val(a));
    });
  }

  Var scale(Var a, double s) {
    Tensor2 out = val(a);
    for (double& x : out.data) x *= s;
    return push(std::move(out), [a, s](Tape& t, const Tensor2& g) {
      t.accumulate(a, g, s);
    });
  }

  Var sigmoid_(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.data) x = dice::sigmoid(x);
    return push(std::move(out), [a](Tape& t, const Tensor2& g) {
      const Tensor2& y = t.cur_value();
      Tensor2& da = t.grad_mut(a);
      for (int i = 0; i < g.size(); ++i)
        da.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    });
  }

  Var tanh_(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.data) x = std::tanh(x);
    return push(std::move(out), [a](Tape& t, const Tensor2& g) {
      const Tensor2& y = t.cur_value();
      Tensor2& da = t.grad_mut(a);
      for (int i = 0; i < g.size(); ++i)
        da.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    });
  }

  Var relu(Var a) {
    Tensor2 out = val(a);
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    return push(std::move(out), [a](Tape& t, const Tensor2& g) {
      const Tensor2& x = t.val(a);
      Tensor2& da = t.grad_mut(a);
      for (int i = 0; i < g.size(); ++i)
        if (x.data[i] > 0.0) da.data[i] += g.data[i];
    });
  }

  // rows [r0, r1) of a
  Var slice_rows(Var a, int r0, int r1) {
    const Tensor2& va = val(a);
    Tensor2 out(r1 - r0, va.cols);
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < va.cols; ++j) out.at(i - r0, j) = va.at(i, j);
    return push(std::move(out), [a, r0](Tape& t, const Tensor2& g) {
      Tensor2& da = t.grad_mut(a);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) da.at(r0 + i, j) += g.at(i, j);
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    int rows = 0;
    int cols = val(parts.front()).cols;
    for (Var p : parts) rows += val(p).rows;
    Tensor2 out(rows, cols);
    int r = 0;
    for (Var p : parts) {
      const Tensor2& vp = val(p);
      for (int i = 0; i < vp.rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(r + i, j) = vp.at(i, j);
      r += vp.rows;
    }
    return push(std::move(out), [parts](Tape& t, const Tensor2& g) {
      int r = 0;
      for (Var p : parts) {
        Tensor2& dp = t.grad_mut(p);
        for (int i = 0; i < dp.rows; ++i)
          for (int j = 0; j < dp.cols; ++j) dp.at(i, j) += g.at(r + i, j);
        r += dp.rows;
      }
    });
  }

  // column vector with row k removed (the mask technique)
  Var drop_row(Var a, int k) {
    const Tensor2& va = val(a);
    Tensor2 out(va.rows - 1, 1);
    for (int i = 0, o = 0; i < va.rows; ++i)
      if (i != k) out.data[o++] = va.data[i];
    return push(std::move(out), [a, k](Tape& t, const Tensor2& g) {
      Tensor2& da = t.grad_mut(a);
      for (int i = 0, o = 0; i < da.rows; ++i)
        if (i != k) da.data[i] += g.data[o++];
    });
  }

  Var sum(Var a) {
    double s = 0.0;
    for (double x : val(a).data) s += x;
    Tensor2 out(1, 1);
    out.data[0] = s;
    return push(std::move(out), [a](Tape& t, const Tensor2& g) {
      Tensor2& da = t.grad_mut(a);
      for (double& x : da.data) x += g.data[0];
    });
  }

  Var sumsq(Var a) {
    double s = 0.0;
    for (double x : val(a).data) s += x * x;
    Tensor2 out(1, 1);
    out.data[0] = s;
    return push(std::move(out), [a](Tape& t, const Tensor2& g) {
      const Tensor2& x = t.val(a);
      Tensor2& da = t.grad_mut(a);
      for (int i = 0; i < x.size(); ++i) da.data[i] += 2.0 * g.data[0] * x.data[i];
    });
  }

  Var dot(Var a, Var b) {
    check_same(a, b, "dot");
    double s = 0.0;
    const Tensor2& va = val(a);
    const Tensor2& vb = val(b);
    for (int i = 0; i < va.size(); ++i) s += va.data[i] * vb.data[i];
    Tensor2 out(1, 1);
    out.data[0] = s;
    return push(std::move(out), [a, b](Tape& t, const Tensor2& g) {
      t.accumulate_scaled(a, t.val(b), g.data[0]);
      t.accumulate_scaled(b, t.val(a), g.data[0]);
    });
  }

  // stable softmax over a column vector
  Var softmax_col(Var a) {
    Tensor2 out = val(a);
    double mx = out.data[0];
    for (double x : out.data) mx = std::max(mx, x);
    double z = 0.0;
    for (double& x : out.data) {
      x = std::exp(x - mx);
      z += x;
    }
    for (double& x : out.data) x /= z;
    return push(std::move(out), [a](Tape& t, const Tensor2& g) {
      const Tensor2& y = t.cur_value();
      Tensor2& da = t.grad_mut(a);
      double gy = 0.0;
      for (int i = 0; i < y.size(); ++i) gy += g.data[i] * y.data[i];
      for (int i = 0; i < y.size(); ++i)
        da.data[i] += y.data[i] * (g.data[i] - gy);
    });
  }

  // -log(p_k) with p clamped into [1e-12, 1-1e-12]
  Var neg_log_entry(Var probs, int k) {
    double p = val(probs).data[k];
    double pc = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
    Tensor2 out(1, 1);
    out.data[0] = -std::log(pc);
    bool inside = p > 1e-12 && p < 1.0 - 1e-12;
    return push(std::move(out), [probs, k, pc, inside](Tape& t, const Tensor2& g) {
      if (inside) t.grad_mut(probs).data[k] += -g.data[0] / pc;
    });
  }

  // Bernoulli negative log-likelihood from a logit, numerically stable
  Var bce_with_logit(Var logit, double y) {
    double t0 = val(logit).data[0];
    Tensor2 out(1, 1);
    out.data[0] = dice::softplus(t0) - y * t0;
    return push(std::move(out), [logit, y](Tape& t, const Tensor2& g) {
      double s = dice::sigmoid(t.val(logit).data[0]);
      t.grad_mut(logit).data[0] += g.data[0] * (s - y);
    });
  }

  // max(0, threshold - x) for scalar x
  Var hinge_below(Var x, double threshold) {
    double v = threshold - val(x).data[0];
    Tensor2 out(1, 1);
    out.data[0] = v > 0.0 ? v : 0.0;
    bool active = v > 0.0;
    return push(std::move(out), [x, active](Tape& t, const Tensor2& g) {
      if (active) t.grad_mut(x).data[0] -= g.data[0];
    });
  }

  Var add_scalars(const std::vector<Var>& vs) {
    double s = 0.0;
    for (Var v : vs) s += val(v).data[0];
    Tensor2 out(1, 1);
    out.data[0] = s;
    return push(std::move(out), [vs](Tape& t, const Tensor2& g) {
      for (Var v : vs) t.grad_mut(v).data[0] += g.data[0];
    });
  }

  // ---- backward ---------------------------------------------------------

  void backward(Var root) {
    if (val(root).size() != 1)
      throw NumericError("backward: root must be a scalar");
    nodes_[root.id].grad.data[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
      cur_ = i;
      if (nodes_[i].back) nodes_[i].back(*this, nodes_[i].grad);
    }
  }

 private:
  using BackFn = std::function<void(Tape&, const Tensor2&)>;

  struct Node {
    Tensor2 value;
    Tensor2 grad;
    BackFn back;
  };

  Var push(Tensor2 v, BackFn fn) {
    Node n;
    n.grad = Tensor2(v.rows, v.cols);
    n.value = std::move(v);
    n.back = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same(Var a, Var b, const char* op) const {
    if (!val(a).same_shape(val(b)))
      throw NumericError(std::string(op) + ": shape mismatch");
  }

  Tensor2& grad_mut(Var v) { return nodes_[v.id].grad; }
  const Tensor2& cur_value() const { return nodes_[cur_].value; }

  void accumulate(Var v, const Tensor2& g, double s) {
    Tensor2& d = grad_mut(v);
    for (int i = 0; i < g.size(); ++i) d.data[i] += s * g.data[i];
  }

  void accumulate_scaled(Var v, const Tensor2& src, double s) {
    Tensor2& d = grad_mut(v);
    for (int i = 0; i < src.size(); ++i) d.data[i] += s * src.data[i];
  }

  void accumulate_had(Var v, const Tensor2& g, const Tensor2& other) {
    Tensor2& d = grad_mut(v);
    for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * other.data[i];
  }

  void add_matmul(Var v, const Tensor2& a, const Tensor2& b) {
    Tensor2& d = grad_mut(v);
    for (int i = 0; i < a.rows; ++i)
      for (int k = 0; k < a.cols; ++k) {
        double aik = a.at(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < b.cols; ++j) d.at(i, j) += aik * b.at(k, j);
      }
  }

  std::vector<Node> nodes_;
  int cur_ = -1;
};

}  // namespace dice::ad
