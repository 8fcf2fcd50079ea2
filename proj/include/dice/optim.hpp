// First-order optimizer (bias-corrected adaptive moments) and the
// central-difference gradient oracle used to cross-check the tape.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dice/common.hpp"
#include "dice/tensor.hpp"

namespace dice {

enum class StepStatus { kOk, kRejectedNonFinite };

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Tensor2> m;  // first moments, shaped like params
  std::vector<Tensor2> v;  // second moments

  static OptimizerState for_params(const std::vector<Tensor2*>& params,
                                   double lr = 1e-3) {
    OptimizerState s;
    s.lr = lr;
    for (const Tensor2* p : params) {
      s.m.emplace_back(p->rows, p->cols);
      s.v.emplace_back(p->rows, p->cols);
    }
    return s;
  }
};

// One update over a parameter set. A non-finite gradient anywhere rejects
// the whole step and signals divergence to the caller.
inline StepStatus adam_step(const std::vector<Tensor2*>& params,
                            const std::vector<const Tensor2*>& grads,
                            OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw NumericError("adam_step: parameter/gradient/state arity mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]))
      throw NumericError("adam_step: gradient shape mismatch");
    if (!grads[i]->all_finite()) return StepStatus::kRejectedNonFinite;
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor2& p = *params[i];
    const Tensor2& g = *grads[i];
    Tensor2& m = state.m[i];
    Tensor2& v = state.v[i];
    for (int j = 0; j < p.size(); ++j) {
      m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g.data[j];
      v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g.data[j] * g.data[j];
      double mhat = m.data[j] / bc1;
      double vhat = v.data[j] / bc2;
      p.data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  return StepStatus::kOk;
}

inline StepStatus adam_step(const std::vector<Tensor2*>& params,
                            const std::vector<Tensor2>& grads,
                            OptimizerState& state) {
  std::vector<const Tensor2*> ptrs;
  ptrs.reserve(grads.size());
  for (const Tensor2& g : grads) ptrs.push_back(&g);
  return adam_step(params, ptrs, state);
}

// Central differences (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
inline std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double eps) {
  if (!(eps > 0.0)) throw NumericError("finite_diff_gradient: eps must be positive");
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double x0 = x[i];
    x[i] = x0 + eps;
    double fp = f(x);
    x[i] = x0 - eps;
    double fm = f(x);
    x[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_gradient: function not finite at probe point");
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// Flatten/unflatten helpers for whole-model gradient checks.
inline std::vector<double> flatten_params(const std::vector<Tensor2*>& params) {
  std::vector<double> out;
  for (const Tensor2* p : params)
    out.insert(out.end(), p->data.begin(), p->data.end());
  return out;
}

inline void unflatten_params(const std::vector<double>& flat,
                             const std::vector<Tensor2*>& params) {
  size_t o = 0;
  for (Tensor2* p : params) {
    std::copy(flat.begin() + o, flat.begin() + o + p->data.size(), p->data.begin());
    o += p->data.size();
  }
}

}  // namespace dice
