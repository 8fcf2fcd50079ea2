// Reference implementations the tests check the library against. Everything
// here is coded directly from definitions with plain loops and shares no code
// with the library (the linear solver is Gauss-Jordan, not Cholesky; AUC
// counts pairs instead of ranking; the chi-square tail is integrated
// numerically instead of using erfc).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double eps = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double dn = f(x);
    x[i] = keep;
    g[i] = (up - dn) / (2.0 * eps);
  }
  return g;
}

inline double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, ref = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1.0);
}

// ---- dense linear algebra --------------------------------------------------------

inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    if (std::fabs(a[col][col]) < 1e-12)
      throw std::runtime_error("oracle solve: singular");
    const double d = a[col][col];
    for (int c = col; c < n; ++c) a[col][c] /= d;
    b[col] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  return b;
}

// ---- logistic regression ---------------------------------------------------------

struct IrlsFit {
  std::vector<double> coef;
  double loglik = 0.0;
  bool converged = false;
};

inline double logistic_loglik_at(const std::vector<std::vector<double>>& x,
                                 const std::vector<int>& y,
                                 const std::vector<double>& coef) {
  double ll = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double eta = 0.0;
    for (size_t j = 0; j < coef.size(); ++j) eta += x[i][j] * coef[j];
    ll += y[i] ? -std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
  }
  return ll;
}

inline IrlsFit irls_logistic(const std::vector<std::vector<double>>& x,
                             const std::vector<int>& y, double ridge = 1e-6,
                             int max_iter = 500) {
  const int n = static_cast<int>(x.size());
  const int p = static_cast<int>(x[0].size());
  IrlsFit fit;
  fit.coef.assign(p, 0.0);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> grad(p, 0.0);
    std::vector<std::vector<double>> hess(p, std::vector<double>(p, 0.0));
    for (int i = 0; i < n; ++i) {
      double eta = 0.0;
      for (int j = 0; j < p; ++j) eta += x[i][j] * fit.coef[j];
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      const double w = mu * (1.0 - mu);
      for (int j = 0; j < p; ++j) {
        grad[j] += (y[i] - mu) * x[i][j];
        for (int c = 0; c < p; ++c) hess[j][c] += w * x[i][j] * x[i][c];
      }
    }
    for (int j = 0; j < p; ++j) {
      grad[j] -= ridge * fit.coef[j];
      hess[j][j] += ridge;
    }
    double worst = 0.0;
    for (double g : grad) worst = std::max(worst, std::fabs(g));
    if (worst < 1e-9 * std::max(1, n)) {
      fit.converged = true;
      break;
    }
    std::vector<double> step = solve_dense(hess, grad);
    double shrink = 1.0;
    for (int half = 0; half < 60; ++half) {
      std::vector<double> trial = fit.coef;
      for (int j = 0; j < p; ++j) trial[j] += shrink * step[j];
      double pen_old = logistic_loglik_at(x, y, fit.coef);
      double pen_new = logistic_loglik_at(x, y, trial);
      for (int j = 0; j < p; ++j) {
        pen_old -= 0.5 * ridge * fit.coef[j] * fit.coef[j];
        pen_new -= 0.5 * ridge * trial[j] * trial[j];
      }
      if (pen_new >= pen_old - 1e-14) {
        fit.coef = trial;
        break;
      }
      shrink *= 0.5;
    }
    double moved = 0.0;
    for (int j = 0; j < p; ++j) moved = std::max(moved, std::fabs(shrink * step[j]));
    if (moved < 1e-12) {  // iterate pinned at working precision
      fit.converged = true;
      break;
    }
  }
  fit.loglik = logistic_loglik_at(x, y, fit.coef);
  return fit;
}

// ---- clustering ------------------------------------------------------------------

// global k-means optimum by enumerating every assignment (k^n of them)
inline double exhaustive_kmeans_objective(
    const std::vector<std::vector<double>>& pts, int k) {
  const int n = static_cast<int>(pts.size());
  const int d = static_cast<int>(pts[0].size());
  std::vector<int> assign(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<std::vector<double>> sum(k, std::vector<double>(d, 0.0));
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      ++count[assign[i]];
      for (int j = 0; j < d; ++j) sum[assign[i]][j] += pts[i][j];
    }
    double obj = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        const double diff = pts[i][j] - sum[assign[i]][j] / count[assign[i]];
        obj += diff * diff;
      }
    best = std::min(best, obj);
    int pos = n - 1;
    while (pos >= 0 && assign[pos] == k - 1) assign[pos--] = 0;
    if (pos < 0) break;
    ++assign[pos];
  }
  return best;
}

inline double point_dist(const std::vector<double>& a,
                         const std::vector<double>& b) {
  double s = 0.0;
  for (size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

inline double brute_silhouette(const std::vector<std::vector<double>>& pts,
                               const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> size(k, 0);
  for (int l : labels) ++size[l];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (size[labels[i]] == 1) continue;  // singleton contributes 0
    std::vector<double> mean_dist(k, 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[labels[j]] += point_dist(pts[i], pts[j]);
    }
    double a = mean_dist[labels[i]] / (size[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == labels[i] || size[c] == 0) continue;
      b = std::min(b, mean_dist[c] / size[c]);
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / n;
}

inline double brute_calinski_harabasz(const std::vector<std::vector<double>>& pts,
                                      const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(pts.size());
  const int d = static_cast<int>(pts[0].size());
  std::vector<std::vector<double>> mu(k, std::vector<double>(d, 0.0));
  std::vector<double> grand(d, 0.0);
  std::vector<int> size(k, 0);
  for (int i = 0; i < n; ++i) {
    ++size[labels[i]];
    for (int j = 0; j < d; ++j) {
      mu[labels[i]][j] += pts[i][j];
      grand[j] += pts[i][j];
    }
  }
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) mu[c][j] /= size[c];
  for (int j = 0; j < d; ++j) grand[j] /= n;
  double between = 0.0, within = 0.0;
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j)
      between += size[c] * (mu[c][j] - grand[j]) * (mu[c][j] - grand[j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      within += (pts[i][j] - mu[labels[i]][j]) * (pts[i][j] - mu[labels[i]][j]);
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / (k - 1)) / (within / (n - k));
}

inline double brute_davies_bouldin(const std::vector<std::vector<double>>& pts,
                                   const std::vector<int>& labels, int k) {
  const int n = static_cast<int>(pts.size());
  const int d = static_cast<int>(pts[0].size());
  std::vector<std::vector<double>> mu(k, std::vector<double>(d, 0.0));
  std::vector<int> size(k, 0);
  for (int i = 0; i < n; ++i) {
    ++size[labels[i]];
    for (int j = 0; j < d; ++j) mu[labels[i]][j] += pts[i][j];
  }
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) mu[c][j] /= size[c];
  std::vector<double> scatter(k, 0.0);
  for (int i = 0; i < n; ++i)
    scatter[labels[i]] += point_dist(pts[i], mu[labels[i]]);
  for (int c = 0; c < k; ++c) scatter[c] /= size[c];
  double total = 0.0;
  for (int a = 0; a < k; ++a) {
    double worst = 0.0;
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      worst = std::max(worst, (scatter[a] + scatter[b]) / point_dist(mu[a], mu[b]));
    }
    total += worst;
  }
  return total / k;
}

// minimum-cost assignment by trying every permutation
inline double brute_assignment_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost[i][perm[i]];
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---- classification --------------------------------------------------------------

inline double pairwise_auc(const std::vector<double>& scores,
                           const std::vector<int>& y) {
  double num = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        num += 1.0;
      else if (scores[i] == scores[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

// ---- chi-square tail -------------------------------------------------------------

// composite-Simpson integral of the 1-df density over [g, g+88]
inline double chi2_sf_quadrature(double g) {
  if (g <= 0.0) return 1.0;
  const double pi = 3.14159265358979323846;
  auto pdf = [&](double x) {
    return std::exp(-0.5 * x) / std::sqrt(2.0 * pi * x);
  };
  const int panels = 200000;
  const double hi = g + 88.0;
  const double h = (hi - g) / panels;
  double s = pdf(g) + pdf(hi);
  for (int i = 1; i < panels; ++i) s += pdf(g + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
