// Clustering quality indices, outcome-classification metrics, subgroup
// breakdowns, planted-label agreement, and the 2-D projection used for
// scatter exports. All metrics are pure functions over plain values.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dice/cohort.hpp"
#include "dice/common.hpp"
#include "dice/significance.hpp"
#include "dice/tensor.hpp"

namespace dice {

struct ClusterIndices {
  double silhouette = 0.0;
  double calinski_harabasz = 0.0;
  double davies_bouldin = 0.0;
};

namespace detail {
inline double row_dist(const Tensor2& z, int i, int j) {
  double s = 0.0;
  for (int c = 0; c < z.cols; ++c) {
    double d = z.at(i, c) - z.at(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}
}  // namespace detail

// Silhouette, Calinski-Harabasz, and Davies-Bouldin over rows of z with
// Euclidean distances. Labels need not be contiguous; empty labels are
// ignored. At least two nonempty clusters required.
inline ClusterIndices clustering_indices(const Tensor2& z,
                                         const std::vector<int>& labels) {
  const int n = z.rows;
  if (n < 3) throw DataError("clustering indices: need at least 3 points");
  if (static_cast<int>(labels.size()) != n)
    throw DataError("clustering indices: label count mismatch");

  // compact nonempty cluster ids
  std::map<int, int> remap;
  for (int l : labels)
    if (!remap.count(l)) remap.emplace(l, 0);
  int k = 0;
  for (auto& [orig, compact] : remap) compact = k++;
  if (k < 2) throw DataError("clustering indices: need at least 2 clusters");
  std::vector<int> lab(n);
  for (int i = 0; i < n; ++i) lab[i] = remap[labels[i]];
  std::vector<int> count(k, 0);
  for (int l : lab) ++count[l];

  // silhouette
  double sil = 0.0;
  std::vector<double> sums(k);
  for (int i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (int j = 0; j < n; ++j)
      if (j != i) sums[lab[j]] += detail::row_dist(z, i, j);
    if (count[lab[i]] <= 1) continue;  // singleton scores 0
    double a = sums[lab[i]] / (count[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != lab[i] && count[c] > 0) b = std::min(b, sums[c] / count[c]);
    double denom = std::max(a, b);
    if (denom > 0.0) sil += (b - a) / denom;
  }
  sil /= n;

  // centroids and global mean
  Tensor2 mu(k, z.cols);
  std::vector<double> grand(z.cols, 0.0);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < z.cols; ++c) {
      mu.at(lab[i], c) += z.at(i, c);
      grand[c] += z.at(i, c);
    }
  for (int kk = 0; kk < k; ++kk)
    for (int c = 0; c < z.cols; ++c) mu.at(kk, c) /= count[kk];
  for (double& g : grand) g /= n;

  double within = 0.0;
  std::vector<double> scatter(k, 0.0);  // mean distance to own centroid
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int c = 0; c < z.cols; ++c) {
      double d = z.at(i, c) - mu.at(lab[i], c);
      sq += d * d;
    }
    within += sq;
    scatter[lab[i]] += std::sqrt(sq);
  }
  for (int kk = 0; kk < k; ++kk) scatter[kk] /= count[kk];

  double between = 0.0;
  for (int kk = 0; kk < k; ++kk) {
    double sq = 0.0;
    for (int c = 0; c < z.cols; ++c) {
      double d = mu.at(kk, c) - grand[c];
      sq += d * d;
    }
    between += count[kk] * sq;
  }

  double ch = within > 0.0
                  ? (between / (k - 1)) / (within / (n - k))
                  : std::numeric_limits<double>::infinity();

  double db = 0.0;
  for (int i = 0; i < k; ++i) {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (int c = 0; c < z.cols; ++c) {
        double d = mu.at(i, c) - mu.at(j, c);
        sq += d * d;
      }
      double m = std::sqrt(sq);
      if (m > 0.0) worst = std::max(worst, (scatter[i] + scatter[j]) / m);
    }
    db += worst;
  }
  db /= k;

  return {sil, ch, db};
}

// Mann-Whitney AUC by average ranks; ties share rank mass.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<int>& y) {
  const int n = static_cast<int>(scores.size());
  if (static_cast<int>(y.size()) != n) throw DataError("auc: length mismatch");
  int pos = 0;
  for (int v : y) pos += v;
  if (pos == 0 || pos == n) throw DataError("auc: both classes required");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });
  double rank_pos = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * ((i + 1) + j);  // ranks are 1-based
    for (int t = i; t < j; ++t)
      if (y[order[t]]) rank_pos += avg_rank;
    i = j;
  }
  double neg = n - pos;
  return (rank_pos - pos * (pos + 1) / 2.0) / (pos * neg);
}

struct ClassificationReport {
  double threshold = 0.5;
  int tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> auc;
  double acc = 0.0;
  std::optional<double> tpr, fpr, tnr, fnr, ppv, npv;
};

inline ClassificationReport confusion_metrics(const std::vector<double>& scores,
                                              const std::vector<int>& y,
                                              double threshold = 0.5) {
  ClassificationReport r;
  r.threshold = threshold;
  const int n = static_cast<int>(scores.size());
  for (int i = 0; i < n; ++i) {
    bool pred = scores[i] >= threshold;
    if (pred && y[i])
      ++r.tp;
    else if (pred && !y[i])
      ++r.fp;
    else if (!pred && y[i])
      ++r.fn;
    else
      ++r.tn;
  }
  r.acc = static_cast<double>(r.tp + r.tn) / n;
  auto ratio = [](int num, int den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / den;
  };
  r.tpr = ratio(r.tp, r.tp + r.fn);
  r.fnr = ratio(r.fn, r.tp + r.fn);
  r.tnr = ratio(r.tn, r.tn + r.fp);
  r.fpr = ratio(r.fp, r.tn + r.fp);
  r.ppv = ratio(r.tp, r.tp + r.fp);
  r.npv = ratio(r.tn, r.tn + r.fn);
  int pos = r.tp + r.fn;
  if (pos > 0 && pos < n) r.auc = roc_auc(scores, y);
  return r;
}

struct SubgroupAuc {
  std::string group;
  int n = 0;
  std::optional<double> auc;  // empty when a class is missing
  bool skipped = false;
};

inline std::vector<SubgroupAuc> subgroup_auc(const std::vector<double>& scores,
                                             const std::vector<int>& y,
                                             const std::vector<std::string>& groups) {
  std::map<std::string, std::vector<int>> members;
  for (size_t i = 0; i < groups.size(); ++i)
    members[groups[i]].push_back(static_cast<int>(i));
  std::vector<SubgroupAuc> out;
  for (const auto& [name, idx] : members) {
    SubgroupAuc row;
    row.group = name;
    row.n = static_cast<int>(idx.size());
    std::vector<double> s;
    std::vector<int> yy;
    for (int i : idx) {
      s.push_back(scores[i]);
      yy.push_back(y[i]);
    }
    int pos = 0;
    for (int v : yy) pos += v;
    if (pos == 0 || pos == row.n)
      row.skipped = true;
    else
      row.auc = roc_auc(s, yy);
    out.push_back(std::move(row));
  }
  return out;
}

struct OutcomeRatios {
  std::vector<double> ratio;  // per cluster; NaN for empty clusters
  std::vector<int> size;
  double spread = 0.0;  // max - min over nonempty clusters
};

inline OutcomeRatios outcome_ratio_by_cluster(const std::vector<int>& labels,
                                              const std::vector<int>& y, int k) {
  OutcomeRatios r;
  r.ratio.assign(k, std::numeric_limits<double>::quiet_NaN());
  r.size.assign(k, 0);
  std::vector<int> hits(k, 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    ++r.size[labels[i]];
    hits[labels[i]] += y[i];
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int kk = 0; kk < k; ++kk) {
    if (r.size[kk] == 0) continue;
    r.ratio[kk] = static_cast<double>(hits[kk]) / r.size[kk];
    lo = std::min(lo, r.ratio[kk]);
    hi = std::max(hi, r.ratio[kk]);
  }
  r.spread = hi >= lo ? hi - lo : 0.0;
  return r;
}

// Chance-corrected agreement between two labelings (planted-label metric
// for synthetic cohorts only).
inline double adjusted_rand_index(const std::vector<int>& a,
                                  const std::vector<int>& b) {
  if (a.size() != b.size()) throw DataError("ari: length mismatch");
  const int n = static_cast<int>(a.size());
  std::map<int, int> ra, rb;
  for (int x : a)
    if (!ra.count(x)) ra.emplace(x, static_cast<int>(ra.size()));
  for (int x : b)
    if (!rb.count(x)) rb.emplace(x, static_cast<int>(rb.size()));
  const int ka = static_cast<int>(ra.size()), kb = static_cast<int>(rb.size());
  std::vector<std::vector<long>> cont(ka, std::vector<long>(kb, 0));
  std::vector<long> sa(ka, 0), sb(kb, 0);
  for (int i = 0; i < n; ++i) {
    int x = ra[a[i]], yy = rb[b[i]];
    ++cont[x][yy];
    ++sa[x];
    ++sb[yy];
  }
  auto choose2 = [](long m) { return m * (m - 1) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) sum_ij += choose2(cont[i][j]);
  for (long v : sa) sum_a += choose2(v);
  for (long v : sb) sum_b += choose2(v);
  double total = choose2(n);
  double expected = sum_a * sum_b / total;
  double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 0.0;  // degenerate labelings
  return (sum_ij - expected) / (max_index - expected);
}

struct PcaProjection {
  Tensor2 coords;                 // N x 2
  std::vector<double> explained;  // variance ratios for the two axes
};

// Projection onto the top-2 principal directions; each direction's
// largest-magnitude loading is made positive so output is sign-stable.
inline PcaProjection pca_project(const Tensor2& z) {
  const int n = z.rows, d = z.cols;
  if (n < 2) throw DataError("projection: need at least 2 points");
  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mean[j] += z.at(i, j);
  for (double& m : mean) m /= n;
  Tensor2 cov(d, d);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) {
      double xa = z.at(i, a) - mean[a];
      for (int b = a; b < d; ++b)
        cov.at(a, b) += xa * (z.at(i, b) - mean[b]);
    }
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < a; ++b) cov.at(a, b) = cov.at(b, a);
  for (double& v : cov.data) v /= n;

  SymEig eig = sym_eig(cov);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);

  PcaProjection out;
  out.coords = Tensor2(n, 2);
  for (int c = 0; c < 2; ++c) {
    if (c >= d) {
      out.explained.push_back(0.0);
      continue;
    }
    std::vector<double> dir(d);
    for (int j = 0; j < d; ++j) dir[j] = eig.vectors.at(j, c);
    int big = 0;
    for (int j = 1; j < d; ++j)
      if (std::fabs(dir[j]) > std::fabs(dir[big])) big = j;
    if (dir[big] < 0.0)
      for (double& v : dir) v = -v;
    for (int i = 0; i < n; ++i) {
      double t = 0.0;
      for (int j = 0; j < d; ++j) t += (z.at(i, j) - mean[j]) * dir[j];
      out.coords.at(i, c) = t;
    }
    out.explained.push_back(total > 0.0 ? std::max(eig.values[c], 0.0) / total
                                        : 0.0);
  }
  return out;
}

// ---- aggregate report -----------------------------------------------------------

struct EvalReport {
  std::string method;
  std::string split;
  int k = 0, d = 0, n = 0;
  std::optional<ClusterIndices> indices;  // absent if clusters collapsed
  ClassificationReport classification;
  std::vector<SubgroupAuc> subgroups;
  OutcomeRatios ratios;
  std::optional<double> ari;  // planted cohorts only
  // outcome AUC of an exact logistic head on the representation itself,
  // next to the membership-based classification block
  std::optional<double> auc_representation;
  std::optional<SignificanceMatrix> significance;
  bool eligible = false;
};

struct EvalInput {
  std::string method;
  std::string split;
  int k = 0, d = 0;
  Tensor2 z;                   // N x dim point matrix
  std::vector<int> labels;     // hard cluster per subject
  std::vector<double> scores;  // outcome probabilities
  bool eligible = false;
  SignificanceConfig sig_config;
};

inline EvalReport evaluate(const EvalInput& in, const Cohort& cohort) {
  const int n = cohort.size();
  if (static_cast<int>(in.labels.size()) != n ||
      static_cast<int>(in.scores.size()) != n || in.z.rows != n)
    throw DataError("evaluate: input sizes disagree with cohort");
  EvalReport r;
  r.method = in.method;
  r.split = in.split;
  r.k = in.k;
  r.d = in.d;
  r.n = n;
  r.eligible = in.eligible;

  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[i] = cohort.subjects[i].outcome;

  std::vector<int> distinct = in.labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() >= 2 && n >= 3)
    r.indices = clustering_indices(in.z, in.labels);

  r.classification = confusion_metrics(in.scores, y);
  if (cohort.has_subgroups()) {
    std::vector<std::string> groups(n);
    for (int i = 0; i < n; ++i)
      groups[i] = cohort.subjects[i].subgroup.value_or("");
    r.subgroups = subgroup_auc(in.scores, y, groups);
  }
  r.ratios = outcome_ratio_by_cluster(in.labels, y, in.k);
  if (cohort.has_planted()) {
    std::vector<int> planted(n);
    for (int i = 0; i < n; ++i) planted[i] = *cohort.subjects[i].planted_cluster;
    r.ari = adjusted_rand_index(in.labels, planted);
  }
  {
    std::vector<std::vector<double>> conf(n);
    for (int i = 0; i < n; ++i) conf[i] = cohort.subjects[i].confounders;
    int pos = 0;
    for (int v : y) pos += v;
    if (distinct.size() >= 2 && pos > 0 && pos < n)
      r.significance =
          significance_matrix(in.labels, conf, y, in.k, in.sig_config);
  }
  return r;
}

}  // namespace dice
