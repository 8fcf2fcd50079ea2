// k-means over latent representations plus the softmax cluster head that
// learns to predict the k-means pseudo-labels.
#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "dice/common.hpp"
#include "dice/rng.hpp"
#include "dice/stats.hpp"
#include "dice/tensor.hpp"

namespace dice {

struct KmeansResult {
  Tensor2 centroids;        // d x K, column k is centroid k
  std::vector<int> labels;  // per point, in [0, K)
  double objective = 0.0;   // sum of squared distances to assigned centroid
  int iterations = 0;
};

namespace detail {

// squared distance between row i of z and row k of centers (both row-major)
inline double row_sq_dist(const Tensor2& z, int i, const Tensor2& centers, int k) {
  double s = 0.0;
  for (int j = 0; j < z.cols; ++j) {
    double d = z.at(i, j) - centers.at(k, j);
    s += d * d;
  }
  return s;
}

inline int nearest_center(const Tensor2& z, int i, const Tensor2& centers) {
  int best = 0;
  double bd = row_sq_dist(z, i, centers, 0);
  for (int k = 1; k < centers.rows; ++k) {
    double d = row_sq_dist(z, i, centers, k);
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

// k-means++ seeding over rows of z
inline Tensor2 kmeanspp_init(const Tensor2& z, int k, Rng& rng) {
  const int n = z.rows;
  Tensor2 centers(k, z.cols);
  int first = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
  for (int j = 0; j < z.cols; ++j) centers.at(0, j) = z.at(first, j);
  std::vector<double> d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int kk = 0; kk < c; ++kk)
        best = std::min(best, row_sq_dist(z, i, centers, kk));
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      double target = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
    }
    for (int j = 0; j < z.cols; ++j) centers.at(c, j) = z.at(pick, j);
  }
  return centers;
}

struct LloydOut {
  Tensor2 centers;  // K x d row-major
  std::vector<int> labels;
  double objective;
  int iterations;
};

// sweep single-point moves with exact size-corrected deltas; strictly
// decreasing, so it escapes assignment-stable states that are not optimal
inline bool hartigan_refine(const Tensor2& z, int k, std::vector<int>& labels) {
  const int n = z.rows, d = z.cols;
  std::vector<int> counts(k, 0);
  Tensor2 sums(k, d);
  for (int i = 0; i < n; ++i) {
    ++counts[labels[i]];
    for (int j = 0; j < d; ++j) sums.at(labels[i], j) += z.at(i, j);
  }
  auto sq_dist_to_mean = [&](int i, int c) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double df = z.at(i, j) - sums.at(c, j) / counts[c];
      s += df * df;
    }
    return s;
  };
  bool moved_any = false;
  for (int pass = 0; pass < 100 * n; ++pass) {
    int best_i = -1, best_b = -1;
    double best_gain = 1e-12;
    for (int i = 0; i < n; ++i) {
      int a = labels[i];
      if (counts[a] <= 1) continue;
      double lose = sq_dist_to_mean(i, a) * counts[a] / (counts[a] - 1.0);
      for (int b = 0; b < k; ++b) {
        if (b == a) continue;
        double gain = lose - sq_dist_to_mean(i, b) * counts[b] / (counts[b] + 1.0);
        if (gain > best_gain) {
          best_gain = gain;
          best_i = i;
          best_b = b;
        }
      }
    }
    if (best_i < 0) break;
    int a = labels[best_i];
    --counts[a];
    ++counts[best_b];
    for (int j = 0; j < d; ++j) {
      sums.at(a, j) -= z.at(best_i, j);
      sums.at(best_b, j) += z.at(best_i, j);
    }
    labels[best_i] = best_b;
    moved_any = true;
  }
  return moved_any;
}

inline LloydOut lloyd_from(const Tensor2& z, int k, Tensor2 centers) {
  const int n = z.rows;
  std::vector<int> labels(n, -1);
  double prev_obj = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < 300; ++it) {
    std::vector<int> next(n);
    for (int i = 0; i < n; ++i) next[i] = nearest_center(z, i, centers);

    std::vector<int> counts(k, 0);
    for (int l : next) ++counts[l];
    for (int empty = 0; empty < k; ++empty) {
      if (counts[empty] > 0) continue;
      int worst = -1;
      double wd = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[next[i]] <= 1) continue;  // never empty another cluster
        double d = row_sq_dist(z, i, centers, next[i]);
        if (d > wd) {
          wd = d;
          worst = i;
        }
      }
      if (worst < 0) throw NumericError("kmeans: cannot repair empty cluster");
      --counts[next[worst]];
      next[worst] = empty;
      ++counts[empty];
    }

    centers.fill(0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < z.cols; ++j) centers.at(next[i], j) += z.at(i, j);
    for (int kk = 0; kk < k; ++kk)
      for (int j = 0; j < z.cols; ++j) centers.at(kk, j) /= counts[kk];

    double obj = 0.0;
    for (int i = 0; i < n; ++i) obj += row_sq_dist(z, i, centers, next[i]);
    if (obj > prev_obj + 1e-9) throw NumericError("kmeans: objective increased");
    prev_obj = obj;
    if (next == labels) {
      ++it;
      break;
    }
    labels = std::move(next);
  }
  return {std::move(centers), std::move(labels), prev_obj, it};
}

inline LloydOut lloyd(const Tensor2& z, int k, Rng& rng) {
  LloydOut out = lloyd_from(z, k, kmeanspp_init(z, k, rng));
  for (int round = 0; round < 50; ++round) {
    if (!hartigan_refine(z, k, out.labels)) break;
    Tensor2 centers(k, z.cols);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < z.rows; ++i) {
      ++counts[out.labels[i]];
      for (int j = 0; j < z.cols; ++j)
        centers.at(out.labels[i], j) += z.at(i, j);
    }
    for (int kk = 0; kk < k; ++kk)
      for (int j = 0; j < z.cols; ++j) centers.at(kk, j) /= counts[kk];
    int prev_iters = out.iterations;
    out = lloyd_from(z, k, std::move(centers));
    out.iterations += prev_iters;
  }
  return out;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeding, best of `restarts` runs by
// objective (earliest run wins ties). Rows of z are points.
inline KmeansResult kmeans(const Tensor2& z, int k, uint64_t seed,
                           int restarts = 10) {
  if (k < 1) throw ConfigError("kmeans: K must be >= 1");
  if (z.rows < k)
    throw DataError("kmeans: " + std::to_string(z.rows) + " points for K=" +
                    std::to_string(k));
  Rng rng(seed);
  detail::LloydOut best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng sub = rng.fork(static_cast<uint64_t>(r));
    detail::LloydOut out = detail::lloyd(z, k, sub);
    if (out.objective < best.objective - 1e-12) best = std::move(out);
  }
  KmeansResult res;
  res.centroids = transpose(best.centers);
  res.labels = std::move(best.labels);
  res.objective = best.objective;
  res.iterations = best.iterations;
  return res;
}

// labels of rows of z against d x K centroids
inline std::vector<int> assign_to_centroids(const Tensor2& z,
                                            const Tensor2& centroids) {
  Tensor2 centers = transpose(centroids);
  std::vector<int> labels(z.rows);
  for (int i = 0; i < z.rows; ++i) labels[i] = detail::nearest_center(z, i, centers);
  return labels;
}

inline double kmeans_objective(const Tensor2& z, const Tensor2& centroids,
                               const std::vector<int>& labels) {
  Tensor2 centers = transpose(centroids);
  double obj = 0.0;
  for (int i = 0; i < z.rows; ++i)
    obj += detail::row_sq_dist(z, i, centers, labels[i]);
  return obj;
}

// ---- label alignment ---------------------------------------------------------

// Minimum-cost perfect matching on a square cost matrix (Hungarian method
// with potentials). Returns match[row] = column.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) match[p[j] - 1] = j - 1;
  return match;
}

// Permutation pi over cluster indices maximizing agreement between
// pi(new_labels) and prev_labels; relabels in place and permutes the
// centroid columns to match.
inline std::vector<int> align_labels(const std::vector<int>& prev_labels,
                                     std::vector<int>& labels,
                                     Tensor2& centroids, int k) {
  std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
  for (size_t i = 0; i < labels.size(); ++i)
    cost[labels[i]][prev_labels[i]] -= 1.0;  // negate overlap for min-cost
  std::vector<int> pi = min_cost_assignment(cost);
  for (int& l : labels) l = pi[l];
  Tensor2 permuted(centroids.rows, centroids.cols);
  for (int kk = 0; kk < k; ++kk)
    for (int j = 0; j < centroids.rows; ++j)
      permuted.at(j, pi[kk]) = centroids.at(j, kk);
  centroids = permuted;
  return pi;
}

// ---- cluster classification head ----------------------------------------------

struct ClusterHead {
  Tensor2 w;  // K x d
  Tensor2 b;  // K x 1

  static ClusterHead make(int k, int d, Rng& rng) {
    ClusterHead h;
    h.w = Tensor2(k, d);
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : h.w.data) v = rng.next_uniform(-bound, bound);
    h.b = Tensor2(k, 1);
    return h;
  }

  std::vector<Tensor2*> params() { return {&w, &b}; }
  std::vector<const Tensor2*> params() const { return {&w, &b}; }
  std::vector<std::string> param_names() const { return {"head_w", "head_b"}; }

  int k() const { return w.rows; }

  // softmax(w z + b) for a latent column vector
  Tensor2 predict(const Tensor2& z) const {
    Tensor2 logits = matmul(w, z);
    for (int i = 0; i < logits.rows; ++i) logits.data[i] += b.data[i];
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double total = 0.0;
    for (double& v : logits.data) {
      v = std::exp(v - mx);
      total += v;
    }
    for (double& v : logits.data) v /= total;
    return logits;
  }
};

inline int argmax_index(const Tensor2& probs) {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i)
    if (probs.data[i] > probs.data[best]) best = i;
  return best;
}

// L_1: summed cross-entropy of soft memberships against pseudo-labels
inline double cluster_ce_loss(const std::vector<int>& labels,
                              const std::vector<Tensor2>& soft) {
  if (labels.size() != soft.size())
    throw NumericError("cluster_ce_loss: length mismatch");
  double total = 0.0;
  for (size_t p = 0; p < labels.size(); ++p) {
    double pr = soft[p].data[labels[p]];
    pr = std::min(std::max(pr, 1e-12), 1.0 - 1e-12);
    total -= std::log(pr);
  }
  return total;
}

}  // namespace dice
