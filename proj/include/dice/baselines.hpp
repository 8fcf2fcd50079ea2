// Comparison methods: PCA + k-means, reconstruction-only autoencoder +
// k-means, and autoencoder trained jointly with outcome classification +
// k-means. Each consumes the same hyper-parameters and epoch budget as the
// joint trainer and scores outcomes through an exact logistic head on hard
// memberships, so reports line up side by side.
#pragma once

#include <string>
#include <vector>

#include "dice/cluster.hpp"
#include "dice/cohort.hpp"
#include "dice/optim.hpp"
#include "dice/representation.hpp"
#include "dice/significance.hpp"
#include "dice/trainer.hpp"

namespace dice {

inline const std::vector<std::string>& baseline_names() {
  static const std::vector<std::string> names = {"pca_kmeans", "ae_kmeans",
                                                 "ae_class_kmeans"};
  return names;
}

struct BaselineModel {
  std::string method;
  int k = 0, d = 0;

  // pca_kmeans
  int flat_len = 0;              // events padded/truncated to this many steps
  std::vector<double> pca_mean;  // over flattened vectors
  Tensor2 pca_components;        // flat_dim x d_eff

  // ae variants
  bool uses_ae = false;
  Autoencoder ae;

  Tensor2 centroids;  // d_eff x K in embedded space
  std::vector<int> train_labels;
  std::vector<double> cluster_coef;  // K entries, [0] pinned to 0
  std::vector<double> conf_coef;
  double intercept = 0.0;

  Tensor2 embed(const Cohort& cohort) const {
    if (uses_ae) return encode_cohort(ae, cohort);
    const int f = cohort.feature_dim();
    const int flat_dim = flat_len * f;
    Tensor2 flat(cohort.size(), flat_dim);
    for (int i = 0; i < cohort.size(); ++i) {
      const Subject& s = cohort.subjects[i];
      for (int t = 0; t < std::min(s.n(), flat_len); ++t)
        for (int j = 0; j < f; ++j)
          flat.at(i, t * f + j) = s.events[t].data[j];
    }
    Tensor2 out(cohort.size(), pca_components.cols);
    for (int i = 0; i < cohort.size(); ++i)
      for (int c = 0; c < pca_components.cols; ++c) {
        double t = 0.0;
        for (int j = 0; j < flat_dim; ++j)
          t += (flat.at(i, j) - pca_mean[j]) * pca_components.at(j, c);
        out.at(i, c) = t;
      }
    return out;
  }

  struct Outputs {
    Tensor2 z;
    std::vector<int> labels;
    std::vector<double> scores;
  };

  Outputs predict_cohort(const Cohort& cohort) const {
    Outputs out;
    out.z = embed(cohort);
    out.labels = assign_to_centroids(out.z, centroids);
    out.scores.resize(cohort.size());
    for (int i = 0; i < cohort.size(); ++i) {
      double t = cluster_coef[out.labels[i]] + intercept;
      const auto& v = cohort.subjects[i].confounders;
      for (size_t j = 0; j < v.size(); ++j) t += conf_coef[j] * v[j];
      out.scores[i] = sigmoid(t);
    }
    return out;
  }
};

namespace detail {

inline void fit_baseline_head(BaselineModel& m, const Cohort& train) {
  const int n = train.size();
  std::vector<int> y(n);
  std::vector<std::vector<double>> conf(n);
  for (int i = 0; i < n; ++i) {
    y[i] = train.subjects[i].outcome;
    conf[i] = train.subjects[i].confounders;
  }
  LogisticFit fit =
      fit_logistic(hard_design(m.train_labels, conf, m.k, {0}), y);
  m.cluster_coef.assign(m.k, 0.0);
  for (int kk = 1; kk < m.k; ++kk) m.cluster_coef[kk] = fit.coef[kk - 1];
  m.conf_coef.assign(train.confounder_dim(), 0.0);
  for (int j = 0; j < train.confounder_dim(); ++j)
    m.conf_coef[j] = fit.coef[m.k - 1 + j];
  m.intercept = fit.coef.back();
}

inline void baseline_cluster_step(BaselineModel& m, const Tensor2& z,
                                  uint64_t seed) {
  KmeansResult km = kmeans(z, m.k, seed);
  m.centroids = km.centroids;
  m.train_labels = km.labels;
}

}  // namespace detail

inline BaselineModel run_pca_kmeans(const SplitCohort& split, int k, int d,
                                    const DiceHyper& hyper) {
  const Cohort& train = split.train;
  BaselineModel m;
  m.method = "pca_kmeans";
  m.k = k;
  m.d = d;
  m.flat_len = 1;
  for (const auto& s : train.subjects) m.flat_len = std::max(m.flat_len, s.n());
  const int f = train.feature_dim();
  const int flat_dim = m.flat_len * f;

  Tensor2 flat(train.size(), flat_dim);
  for (int i = 0; i < train.size(); ++i) {
    const Subject& s = train.subjects[i];
    for (int t = 0; t < std::min(s.n(), m.flat_len); ++t)
      for (int j = 0; j < f; ++j) flat.at(i, t * f + j) = s.events[t].data[j];
  }
  m.pca_mean.assign(flat_dim, 0.0);
  for (int i = 0; i < flat.rows; ++i)
    for (int j = 0; j < flat_dim; ++j) m.pca_mean[j] += flat.at(i, j);
  for (double& v : m.pca_mean) v /= flat.rows;

  Tensor2 cov(flat_dim, flat_dim);
  for (int i = 0; i < flat.rows; ++i)
    for (int a = 0; a < flat_dim; ++a) {
      double xa = flat.at(i, a) - m.pca_mean[a];
      for (int b = a; b < flat_dim; ++b)
        cov.at(a, b) += xa * (flat.at(i, b) - m.pca_mean[b]);
    }
  for (int a = 0; a < flat_dim; ++a)
    for (int b = 0; b < a; ++b) cov.at(a, b) = cov.at(b, a);
  for (double& v : cov.data) v /= flat.rows;

  SymEig eig = sym_eig(cov);
  const int d_eff = std::min(d, flat_dim);
  m.pca_components = Tensor2(flat_dim, d_eff);
  for (int c = 0; c < d_eff; ++c) {
    int big = 0;
    for (int j = 1; j < flat_dim; ++j)
      if (std::fabs(eig.vectors.at(j, c)) > std::fabs(eig.vectors.at(big, c)))
        big = j;
    double sign = eig.vectors.at(big, c) < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < flat_dim; ++j)
      m.pca_components.at(j, c) = sign * eig.vectors.at(j, c);
  }

  detail::baseline_cluster_step(m, m.embed(train),
                                Rng(hyper.seed).fork(0x2000).seed());
  detail::fit_baseline_head(m, train);
  return m;
}

namespace detail {

// Shared loop for the two autoencoder baselines. with_outcome_head wires a
// dense logistic readout on z (+ confounders) into the loss.
inline BaselineModel run_ae_baseline(const SplitCohort& split, int k, int d,
                                     const DiceHyper& hyper,
                                     bool with_outcome_head) {
  const Cohort& train = split.train;
  const int n = train.size();
  if (n < k)
    throw DataError("baseline: " + std::to_string(n) + " subjects for K=" +
                    std::to_string(k));
  BaselineModel m;
  m.method = with_outcome_head ? "ae_class_kmeans" : "ae_kmeans";
  m.k = k;
  m.d = d;
  m.uses_ae = true;

  Rng root(hyper.seed);
  Rng init_rng = root.fork(1);
  m.ae = Autoencoder::make(train.kind, train.feature_dim(), d, init_rng);
  const int conf_dim = train.confounder_dim();
  Tensor2 head_w(1, d + conf_dim);
  Tensor2 head_b(1, 1);
  if (with_outcome_head) {
    double bound = 1.0 / std::sqrt(static_cast<double>(d + conf_dim));
    for (double& v : head_w.data) v = init_rng.next_uniform(-bound, bound);
  }

  std::vector<Tensor2*> params = m.ae.params();
  if (with_outcome_head) {
    params.push_back(&head_w);
    params.push_back(&head_b);
  }
  OptimizerState state = OptimizerState::for_params(params, hyper.lr);

  const int epochs = 1 + hyper.n_iter * hyper.n_epoch;  // same budget as DICE
  for (int e = 0; e < epochs; ++e) {
    Rng shuffle_rng = root.fork(0x100 + static_cast<uint64_t>(e));
    for (const auto& batch : make_batches(n, hyper.batch_size, shuffle_rng)) {
      ad::Tape tape;
      AutoencoderGraph g(tape, m.ae);
      std::vector<ad::Var> pv = g.param_vars();
      ad::Var w_v{}, b_v{};
      if (with_outcome_head) {
        w_v = tape.leaf(head_w);
        b_v = tape.leaf(head_b);
        pv.push_back(w_v);
        pv.push_back(b_v);
      }
      std::vector<ad::Var> recon, bce;
      for (int i : batch) {
        const Subject& s = train.subjects[i];
        ad::Var z = g.encode(s);
        recon.push_back(g.recon_loss(s, z));
        if (with_outcome_head) {
          Tensor2 v(conf_dim, 1);
          for (int j = 0; j < conf_dim; ++j) v.data[j] = s.confounders[j];
          ad::Var design =
              conf_dim > 0 ? tape.concat_rows({z, tape.leaf(v)}) : z;
          ad::Var logit = tape.add(tape.matmul(w_v, design), b_v);
          bce.push_back(tape.bce_with_logit(logit, s.outcome));
        }
      }
      ad::Var loss = tape.scale(tape.add_scalars(recon),
                                hyper.lambda1 / static_cast<double>(batch.size()));
      if (with_outcome_head) {
        double sum_scale = static_cast<double>(n) / batch.size();
        ad::Var l2 = tape.scale(tape.add_scalars(bce), hyper.lambda3 * sum_scale);
        loss = tape.add_scalars({loss, l2});
      }
      tape.backward(loss);
      std::vector<Tensor2> grads;
      for (ad::Var v : pv) grads.push_back(tape.grad(v));
      adam_step(params, grads, state);
    }
  }

  detail::baseline_cluster_step(m, encode_cohort(m.ae, train),
                                root.fork(0x2000).seed());
  detail::fit_baseline_head(m, train);
  return m;
}

}  // namespace detail

inline BaselineModel run_baseline(const SplitCohort& split,
                                  const std::string& method, int k, int d,
                                  const DiceHyper& hyper) {
  if (split.train.size() < k)
    throw DataError("baseline: " + std::to_string(split.train.size()) +
                    " subjects for K=" + std::to_string(k));
  if (method == "pca_kmeans") return run_pca_kmeans(split, k, d, hyper);
  if (method == "ae_kmeans")
    return detail::run_ae_baseline(split, k, d, hyper, false);
  if (method == "ae_class_kmeans")
    return detail::run_ae_baseline(split, k, d, hyper, true);
  throw ConfigError("unknown baseline '" + method + "'");
}

}  // namespace dice
