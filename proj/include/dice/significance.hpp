// Logistic outcome modeling over cluster memberships and confounders,
// pairwise likelihood-ratio tests between clusters via masked indicator
// columns, and the hinge penalty that pushes training toward pairwise
// significance.
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dice/autograd.hpp"
#include "dice/common.hpp"
#include "dice/stats.hpp"
#include "dice/tensor.hpp"

namespace dice {

struct SignificanceConfig {
  double alpha = 0.05;
  double alpha_g = 3.841;

  static SignificanceConfig from_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ConfigError("significance level must lie in (0,1)");
    return {alpha, chi_square_isf_1df(alpha)};
  }
};

// ---- logistic regression ------------------------------------------------------

struct LogisticFit {
  std::vector<double> coef;
  double loglik = 0.0;  // unpenalized, at the fitted coefficients
  bool converged = false;
  bool warning = false;  // separation / degenerate likelihood
  int iterations = 0;
};

namespace detail {

constexpr double kRidge = 1e-6;

inline double logistic_loglik(const Tensor2& x, const std::vector<int>& y,
                              const std::vector<double>& coef) {
  double ll = 0.0;
  for (int i = 0; i < x.rows; ++i) {
    double t = 0.0;
    for (int j = 0; j < x.cols; ++j) t += x.at(i, j) * coef[j];
    ll += y[i] * t - softplus(t);
  }
  return ll;
}

inline double penalized_loglik(const Tensor2& x, const std::vector<int>& y,
                               const std::vector<double>& coef) {
  double pen = 0.0;
  for (double c : coef) pen += c * c;
  return logistic_loglik(x, y, coef) - kRidge * pen;
}

// One pass of damped Newton maximization of the ridge-penalized loglik.
// Returns max |score| before the step.
inline double newton_pass(const Tensor2& x, const std::vector<int>& y,
                          std::vector<double>& coef) {
  const int n = x.rows, d = x.cols;
  std::vector<double> score(d, 0.0);
  Tensor2 hess(d, d);
  for (int i = 0; i < n; ++i) {
    double t = 0.0;
    for (int j = 0; j < d; ++j) t += x.at(i, j) * coef[j];
    double p = sigmoid(t);
    double r = y[i] - p;
    double w = p * (1.0 - p);
    for (int j = 0; j < d; ++j) {
      score[j] += r * x.at(i, j);
      for (int k = j; k < d; ++k) hess.at(j, k) += w * x.at(i, j) * x.at(i, k);
    }
  }
  double max_score = 0.0;
  for (int j = 0; j < d; ++j) {
    score[j] -= 2.0 * kRidge * coef[j];
    max_score = std::max(max_score, std::fabs(score[j]));
    hess.at(j, j) += 2.0 * kRidge;
    for (int k = 0; k < j; ++k) hess.at(j, k) = hess.at(k, j);
  }
  if (max_score < 1e-8) return max_score;

  std::vector<double> delta = solve_spd(hess, score);
  double base = penalized_loglik(x, y, coef);
  double decrement = 0.0;  // predicted gain of the full Newton step, >= 0
  for (int j = 0; j < d; ++j) decrement += score[j] * delta[j];
  // once the predicted gain is below the round-off of the loglik itself no
  // step can measurably improve; the iterate is optimal at working precision
  if (decrement < 32.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(base)))
    return 0.0;
  double step = 1.0;
  std::vector<double> trial(d);
  for (int h = 0; h < 40; ++h) {
    for (int j = 0; j < d; ++j) trial[j] = coef[j] + step * delta[j];
    double ll = penalized_loglik(x, y, trial);
    if (std::isfinite(ll) && ll >= base) {
      coef = trial;
      return max_score;
    }
    step *= 0.5;
  }
  throw NumericError("logistic fit: damped step failed to improve");
}

}  // namespace detail

// Warm-started partial fit: at most `max_steps` damped Newton passes.
inline void logistic_newton_steps(const Tensor2& design,
                                  const std::vector<int>& y,
                                  std::vector<double>& coef, int max_steps) {
  if (design.rows != static_cast<int>(y.size()))
    throw NumericError("logistic fit: design rows do not match labels");
  if (static_cast<int>(coef.size()) != design.cols)
    throw NumericError("logistic fit: coefficient length mismatch");
  for (int s = 0; s < max_steps; ++s)
    if (detail::newton_pass(design, y, coef) < 1e-8) break;
}

// Damped Newton maximization of the Bernoulli log-likelihood with a small
// ridge; design must carry its own intercept column.
inline LogisticFit fit_logistic(const Tensor2& design, const std::vector<int>& y) {
  if (design.rows != static_cast<int>(y.size()))
    throw NumericError("logistic fit: design rows do not match labels");
  if (design.rows < design.cols)
    throw DataError("logistic fit: fewer rows than columns");
  LogisticFit fit;
  fit.coef.assign(design.cols, 0.0);
  for (fit.iterations = 0; fit.iterations < 100; ++fit.iterations) {
    if (detail::newton_pass(design, y, fit.coef) < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  fit.loglik = detail::logistic_loglik(design, y, fit.coef);
  double biggest = 0.0;
  for (double c : fit.coef) biggest = std::max(biggest, std::fabs(c));
  fit.warning = !fit.converged || biggest > 10.0;
  return fit;
}

// L_2: negative summed Bernoulli log-likelihood of probability predictions
inline double outcome_bce_loss(const std::vector<double>& yhat,
                               const std::vector<int>& y) {
  if (yhat.size() != y.size()) throw NumericError("outcome loss: length mismatch");
  double total = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    double p = std::min(std::max(yhat[i], 1e-12), 1.0 - 1e-12);
    total -= y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total;
}

// ---- design matrices -----------------------------------------------------------

namespace detail {
inline bool contains(const std::vector<int>& v, int x) {
  for (int e : v)
    if (e == x) return true;
  return false;
}
}  // namespace detail

// Columns: cluster indicators except the masked ones, then confounders,
// then an intercept of ones.
inline Tensor2 hard_design(const std::vector<int>& labels,
                           const std::vector<std::vector<double>>& conf, int k,
                           const std::vector<int>& mask) {
  const int n = static_cast<int>(labels.size());
  const int m = conf.empty() ? 0 : static_cast<int>(conf.front().size());
  Tensor2 x(n, k - static_cast<int>(mask.size()) + m + 1);
  for (int i = 0; i < n; ++i) {
    int col = 0;
    for (int kk = 0; kk < k; ++kk) {
      if (detail::contains(mask, kk)) continue;
      x.at(i, col++) = labels[i] == kk ? 1.0 : 0.0;
    }
    for (int j = 0; j < m; ++j) x.at(i, col++) = conf[i][j];
    x.at(i, col) = 1.0;
  }
  return x;
}

// Same layout with soft memberships in place of indicators.
inline Tensor2 soft_design(const std::vector<Tensor2>& soft,
                           const std::vector<std::vector<double>>& conf,
                           const std::vector<int>& mask) {
  const int n = static_cast<int>(soft.size());
  const int k = soft.front().size();
  const int m = conf.empty() ? 0 : static_cast<int>(conf.front().size());
  Tensor2 x(n, k - static_cast<int>(mask.size()) + m + 1);
  for (int i = 0; i < n; ++i) {
    int col = 0;
    for (int kk = 0; kk < k; ++kk) {
      if (detail::contains(mask, kk)) continue;
      x.at(i, col++) = soft[i].data[kk];
    }
    for (int j = 0; j < m; ++j) x.at(i, col++) = conf[i][j];
    x.at(i, col) = 1.0;
  }
  return x;
}

// ---- likelihood-ratio machinery -------------------------------------------------

inline void require_nonempty(const std::vector<int>& labels, int k, int cluster) {
  for (int l : labels)
    if (l == cluster) return;
  throw DataError("likelihood ratio: cluster " + std::to_string(cluster) +
                  " is empty");
}

// G = 2 (loglik_full - loglik_reduced); full masks k1 (reference), reduced
// masks k1 and k2, so the test has one degree of freedom.
inline double likelihood_ratio(const std::vector<int>& labels,
                               const std::vector<std::vector<double>>& conf,
                               const std::vector<int>& y, int k, int k1, int k2) {
  if (k1 == k2) throw ConfigError("likelihood ratio: k1 and k2 must differ");
  require_nonempty(labels, k, k1);
  require_nonempty(labels, k, k2);
  LogisticFit full = fit_logistic(hard_design(labels, conf, k, {k1}), y);
  LogisticFit reduced = fit_logistic(hard_design(labels, conf, k, {k1, k2}), y);
  return 2.0 * (full.loglik - reduced.loglik);
}

struct SignificanceMatrix {
  Tensor2 p;                     // K x K p-values, zero diagonal
  Tensor2 g;                     // K x K statistics
  std::vector<char> cluster_ok;  // nonempty flags
  bool defined = false;          // all clusters nonempty
  bool eligible = false;         // every pairwise G above the critical value
};

inline SignificanceMatrix significance_matrix(
    const std::vector<int>& labels, const std::vector<std::vector<double>>& conf,
    const std::vector<int>& y, int k, const SignificanceConfig& config) {
  SignificanceMatrix s;
  s.p = Tensor2(k, k);
  s.g = Tensor2(k, k);
  s.cluster_ok.assign(k, 0);
  for (int l : labels)
    if (l >= 0 && l < k) s.cluster_ok[l] = 1;
  s.defined = true;
  for (char ok : s.cluster_ok)
    if (!ok) s.defined = false;
  if (!s.defined) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j && (!s.cluster_ok[i] || !s.cluster_ok[j])) {
          s.p.at(i, j) = nan;
          s.g.at(i, j) = nan;
        }
    s.eligible = false;
    if (k < 2) return s;
  }

  bool all_below = true;
  for (int k1 = 0; k1 < k; ++k1)
    for (int k2 = k1 + 1; k2 < k; ++k2) {
      if (!s.cluster_ok[k1] || !s.cluster_ok[k2]) {
        all_below = false;
        continue;
      }
      double g = likelihood_ratio(labels, conf, y, k, k1, k2);
      if (g < -1e-6)
        throw NumericError("likelihood ratio came out negative: G=" +
                           std::to_string(g));
      double p = chi_square_sf_1df(std::max(g, 0.0));
      s.g.at(k1, k2) = s.g.at(k2, k1) = g;
      s.p.at(k1, k2) = s.p.at(k2, k1) = p;
      if (!(g > config.alpha_g)) all_below = false;
    }
  s.eligible = s.defined && k >= 2 && all_below;
  return s;
}

// ---- differentiable penalty ------------------------------------------------------

// Per-pair logistic heads used inside the training penalty. Coefficients are
// constants on the tape; they are refreshed between gradient steps by a few
// warm-started Newton passes on the current soft memberships.
struct PenaltyWorkspace {
  int k = 0;
  int conf_dim = 0;
  struct Pair {
    int k1, k2;
    std::vector<double> full_coef;     // k-1 memberships + conf + intercept
    std::vector<double> reduced_coef;  // k-2 memberships + conf + intercept
  };
  std::vector<Pair> pairs;

  static PenaltyWorkspace make(int k, int conf_dim) {
    PenaltyWorkspace ws;
    ws.k = k;
    ws.conf_dim = conf_dim;
    for (int k1 = 0; k1 < k; ++k1)
      for (int k2 = k1 + 1; k2 < k; ++k2) {
        Pair p;
        p.k1 = k1;
        p.k2 = k2;
        p.full_coef.assign(k - 1 + conf_dim + 1, 0.0);
        p.reduced_coef.assign(k - 2 + conf_dim + 1, 0.0);
        ws.pairs.push_back(std::move(p));
      }
    return ws;
  }

  void refresh(const std::vector<Tensor2>& soft,
               const std::vector<std::vector<double>>& conf,
               const std::vector<int>& y, int steps) {
    for (Pair& p : pairs) {
      logistic_newton_steps(soft_design(soft, conf, {p.k1}), y, p.full_coef,
                            steps);
      logistic_newton_steps(soft_design(soft, conf, {p.k1, p.k2}), y,
                            p.reduced_coef, steps);
    }
  }
};

// Tape node for one pair's scaled G statistic: gradients reach the soft
// memberships; head coefficients stay fixed. `scale` lifts a mini-batch
// statistic to full-split magnitude.
inline ad::Var pair_g_statistic(ad::Tape& tape,
                                const std::vector<ad::Var>& soft,
                                const std::vector<const std::vector<double>*>& conf,
                                const std::vector<int>& y,
                                const PenaltyWorkspace::Pair& pair,
                                double scale) {
  auto head_loss = [&](const std::vector<double>& coef,
                       const std::vector<int>& mask) {
    Tensor2 coef_t(static_cast<int>(coef.size()), 1);
    coef_t.data = coef;
    ad::Var coef_v = tape.leaf(coef_t);
    std::vector<ad::Var> terms;
    terms.reserve(y.size());
    for (size_t p = 0; p < y.size(); ++p) {
      ad::Var kept = soft[p];
      for (int m : mask) kept = tape.drop_row(kept, m);
      Tensor2 rest(static_cast<int>(conf[p]->size()) + 1, 1, 1.0);
      for (size_t j = 0; j < conf[p]->size(); ++j) rest.data[j] = (*conf[p])[j];
      ad::Var design = tape.concat_rows({kept, tape.leaf(rest)});
      ad::Var logit = tape.dot(coef_v, design);
      terms.push_back(tape.bce_with_logit(logit, y[p]));
    }
    return tape.add_scalars(terms);
  };
  std::vector<int> full_mask = {pair.k1};
  std::vector<int> reduced_mask = pair.k1 < pair.k2
                                      ? std::vector<int>{pair.k2, pair.k1}
                                      : std::vector<int>{pair.k1, pair.k2};
  ad::Var l2_full = head_loss(pair.full_coef, full_mask);
  ad::Var l2_reduced = head_loss(pair.reduced_coef, reduced_mask);
  return tape.scale(tape.sub(l2_reduced, l2_full), 2.0 * scale);
}

// Sum over unordered pairs of max(0, alpha_g - G~).
inline ad::Var significance_penalty(ad::Tape& tape,
                                    const std::vector<ad::Var>& soft,
                                    const std::vector<const std::vector<double>*>& conf,
                                    const std::vector<int>& y,
                                    const PenaltyWorkspace& ws, double alpha_g,
                                    double scale) {
  std::vector<ad::Var> hinges;
  for (const auto& pair : ws.pairs) {
    ad::Var g = pair_g_statistic(tape, soft, conf, y, pair, scale);
    hinges.push_back(tape.hinge_below(g, alpha_g));
  }
  if (hinges.empty()) return tape.leaf(Tensor2(1, 1));
  return tape.add_scalars(hinges);
}

}  // namespace dice
