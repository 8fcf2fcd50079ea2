// Joint training: autoencoder + cluster head + outcome head optimized
// together under the clustering, classification, outcome, and significance
// terms, alternating with k-means refreshes of centroids and pseudo-labels.
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dice/cluster.hpp"
#include "dice/cohort.hpp"
#include "dice/optim.hpp"
#include "dice/representation.hpp"
#include "dice/significance.hpp"

namespace dice {

struct DiceHyper {
  double lambda1 = 0.1;   // reconstruction
  double lambda2 = 10.0;  // cluster classification
  double lambda3 = 1.0;   // outcome classification
  double lambda4 = 1.0;   // significance hinge
  int n_iter = 60;
  int n_epoch = 1;
  double alpha = 0.05;
  double alpha_g = 3.841;
  double lr = 1e-3;
  int batch_size = 32;
  int newton_refresh_steps = 5;
  uint64_t seed = 0;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
      throw ConfigError("hyper: loss weights must be nonnegative");
    if (n_iter < 1 || n_epoch < 1)
      throw ConfigError("hyper: n_iter and n_epoch must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ConfigError("hyper: alpha must lie in (0,1)");
    if (!(lr > 0.0)) throw ConfigError("hyper: learning rate must be positive");
    if (batch_size < 1) throw ConfigError("hyper: batch size must be >= 1");
  }

  SignificanceConfig significance() const { return {alpha, alpha_g}; }
};

struct TraceRow {
  int epoch = 0;       // global joint-epoch counter, 1-based
  int outer_iter = 0;  // k-means refresh index, 1-based
  double l_ae = 0, l_clustering = 0, l1 = 0, l2 = 0, penalty = 0, total = 0;
  bool eligible = false;
};

struct DiceModel {
  CohortKind kind = CohortKind::kOneTime;
  int k = 0;
  int d = 0;
  int feature_dim = 0;
  int conf_dim = 0;

  Autoencoder ae;
  ClusterHead head;
  Tensor2 out_w;  // 1 x (K + conf_dim), gradient-path outcome head
  Tensor2 out_b;  // 1 x 1

  // reporting outcome head: exact fit on hard memberships, cluster 0 as
  // the reference level
  std::vector<double> outcome_cluster_coef;  // K entries, [0] pinned to 0
  std::vector<double> outcome_conf_coef;
  double outcome_intercept = 0.0;
  bool outcome_head_warning = false;

  Tensor2 centroids;  // d x K
  DiceHyper hyper;
  Normalization normalization;
  std::vector<std::string> feature_names, confounder_names;

  std::vector<int> train_labels;
  std::vector<Tensor2> train_soft;
  SignificanceMatrix train_sig;
  std::vector<double> cluster_outcome_ratio;  // training split, per cluster
  std::vector<double> label_change_frac;      // per outer iteration
  std::vector<TraceRow> trace;
  bool eligible = false;

  std::vector<Tensor2*> params() {
    std::vector<Tensor2*> ps = ae.params();
    ps.push_back(&head.w);
    ps.push_back(&head.b);
    ps.push_back(&out_w);
    ps.push_back(&out_b);
    return ps;
  }
  std::vector<const Tensor2*> params() const {
    auto ps = const_cast<DiceModel*>(this)->params();
    return {ps.begin(), ps.end()};
  }
  std::vector<std::string> param_names() const {
    std::vector<std::string> names = ae.param_names();
    for (const auto& n : head.param_names()) names.push_back(n);
    names.push_back("out_w");
    names.push_back("out_b");
    return names;
  }
};

struct LossComponents {
  double l_ae = 0, l_clustering = 0, l1 = 0, l2 = 0, penalty = 0, total = 0;
};

// One recorded forward pass of the joint objective over a batch.
// sum_scale lifts the summed L1/L2/penalty terms from batch to split
// magnitude (P/|B|); the clustering term is the k-means objective snapshot
// and contributes no gradient between refreshes.
struct JointGraph {
  ad::Var total;
  std::vector<ad::Var> param_vars;
  LossComponents components;
};

inline JointGraph build_joint_graph(
    ad::Tape& tape, const DiceModel& model,
    const std::vector<const Subject*>& batch,
    const std::vector<int>& pseudo_labels, double l_clustering_snapshot,
    const PenaltyWorkspace* penalty_ws, double sum_scale) {
  const DiceHyper& h = model.hyper;
  JointGraph g;

  AutoencoderGraph ae(tape, model.ae);
  g.param_vars = ae.param_vars();
  ad::Var head_w = tape.leaf(model.head.w);
  ad::Var head_b = tape.leaf(model.head.b);
  ad::Var out_w = tape.leaf(model.out_w);
  ad::Var out_b = tape.leaf(model.out_b);
  g.param_vars.push_back(head_w);
  g.param_vars.push_back(head_b);
  g.param_vars.push_back(out_w);
  g.param_vars.push_back(out_b);

  const int n = static_cast<int>(batch.size());
  std::vector<ad::Var> recon, l1_terms, l2_terms, soft;
  std::vector<const std::vector<double>*> conf;
  std::vector<int> y;
  recon.reserve(n);
  soft.reserve(n);
  for (int p = 0; p < n; ++p) {
    const Subject& s = *batch[p];
    ad::Var z = ae.encode(s);
    recon.push_back(ae.recon_loss(s, z));
    ad::Var chat = tape.softmax_col(tape.add(tape.matmul(head_w, z), head_b));
    soft.push_back(chat);
    l1_terms.push_back(tape.neg_log_entry(chat, pseudo_labels[p]));
    Tensor2 v(model.conf_dim, 1);
    for (int j = 0; j < model.conf_dim; ++j) v.data[j] = s.confounders[j];
    ad::Var design = model.conf_dim > 0
                         ? tape.concat_rows({chat, tape.leaf(v)})
                         : chat;
    ad::Var logit = tape.add(tape.matmul(out_w, design), out_b);
    l2_terms.push_back(tape.bce_with_logit(logit, s.outcome));
    conf.push_back(&s.confounders);
    y.push_back(s.outcome);
  }

  ad::Var l_ae = tape.scale(tape.add_scalars(recon), 1.0 / n);
  ad::Var l1 = tape.scale(tape.add_scalars(l1_terms), sum_scale);
  ad::Var l2 = tape.scale(tape.add_scalars(l2_terms), sum_scale);
  Tensor2 lc(1, 1);
  lc.data[0] = l_clustering_snapshot;
  ad::Var l_clustering = tape.leaf(lc);

  ad::Var pen;
  bool has_pen = penalty_ws != nullptr && h.lambda4 > 0.0 && model.k >= 2;
  if (has_pen)
    pen = significance_penalty(tape, soft, conf, y, *penalty_ws, h.alpha_g,
                               sum_scale);
  else
    pen = tape.leaf(Tensor2(1, 1));

  g.total = tape.add_scalars(
      {tape.scale(l_ae, h.lambda1), l_clustering, tape.scale(l1, h.lambda2),
       tape.scale(l2, h.lambda3), tape.scale(pen, h.lambda4)});

  g.components.l_ae = tape.val(l_ae).data[0];
  g.components.l_clustering = l_clustering_snapshot;
  g.components.l1 = tape.val(l1).data[0];
  g.components.l2 = tape.val(l2).data[0];
  g.components.penalty = tape.val(pen).data[0];
  g.components.total = tape.val(g.total).data[0];
  return g;
}

// Weighted total recomputed from already-evaluated components.
inline double weighted_total(const LossComponents& c, const DiceHyper& h) {
  return h.lambda1 * c.l_ae + c.l_clustering + h.lambda2 * c.l1 +
         h.lambda3 * c.l2 + h.lambda4 * c.penalty;
}

struct Prediction {
  Tensor2 z;     // d x 1
  Tensor2 soft;  // K x 1
  int hard = 0;
  double outcome_prob = 0.0;
};

inline double outcome_head_prob(const DiceModel& m, int hard,
                                const std::vector<double>& conf) {
  double t = m.outcome_cluster_coef[hard] + m.outcome_intercept;
  for (size_t j = 0; j < conf.size(); ++j) t += m.outcome_conf_coef[j] * conf[j];
  return sigmoid(t);
}

// Subject must already be in the model's normalized feature space.
inline Prediction predict(const DiceModel& m, const Subject& s) {
  if (s.events.empty() || s.events.front().rows != m.feature_dim)
    throw DataError("predict: subject has " +
                    std::to_string(s.events.empty() ? 0 : s.events.front().rows) +
                    " features, model expects " + std::to_string(m.feature_dim));
  if (static_cast<int>(s.confounders.size()) != m.conf_dim)
    throw DataError("predict: subject has " +
                    std::to_string(s.confounders.size()) +
                    " confounders, model expects " + std::to_string(m.conf_dim));
  Prediction out;
  out.z = encode_subject(m.ae, s);
  out.soft = m.head.predict(out.z);
  out.hard = argmax_index(out.soft);
  out.outcome_prob = outcome_head_prob(m, out.hard, s.confounders);
  return out;
}

namespace detail {

inline std::vector<std::vector<int>> make_batches(int n, int batch_size,
                                                  Rng& rng) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int at = 0; at < n; at += batch_size) {
    int hi = std::min(n, at + batch_size);
    batches.emplace_back(order.begin() + at, order.begin() + hi);
  }
  return batches;
}

inline void fit_reporting_head(DiceModel& model, const std::vector<int>& y,
                               const std::vector<std::vector<double>>& conf) {
  Tensor2 design = hard_design(model.train_labels, conf, model.k, {0});
  LogisticFit fit = fit_logistic(design, y);
  model.outcome_cluster_coef.assign(model.k, 0.0);
  for (int kk = 1; kk < model.k; ++kk)
    model.outcome_cluster_coef[kk] = fit.coef[kk - 1];
  model.outcome_conf_coef.assign(conf.empty() ? 0 : conf.front().size(), 0.0);
  for (size_t j = 0; j < model.outcome_conf_coef.size(); ++j)
    model.outcome_conf_coef[j] = fit.coef[model.k - 1 + j];
  model.outcome_intercept = fit.coef.back();
  model.outcome_head_warning = fit.warning;
}

}  // namespace detail

inline DiceModel train_dice(const SplitCohort& split, int k, int d,
                            const DiceHyper& hyper) {
  hyper.validate();
  if (k < 2) throw ConfigError("train: K must be >= 2");
  if (d < 1) throw ConfigError("train: latent dimension must be >= 1");
  const Cohort& train = split.train;
  const int n = train.size();
  if (n < k)
    throw DataError("train: " + std::to_string(n) + " training subjects for K=" +
                    std::to_string(k));
  {
    int ones = 0;
    for (const auto& s : train.subjects) ones += s.outcome;
    if (ones == 0 || ones == n)
      throw DataError("train: training split has a single outcome class");
  }

  DiceModel model;
  model.kind = train.kind;
  model.k = k;
  model.d = d;
  model.feature_dim = train.feature_dim();
  model.conf_dim = train.confounder_dim();
  model.hyper = hyper;
  model.normalization = train.normalization;
  model.feature_names = train.feature_names;
  model.confounder_names = train.confounder_names;

  Rng root(hyper.seed);
  Rng init_rng = root.fork(1);
  model.ae = Autoencoder::make(train.kind, model.feature_dim, d, init_rng);
  model.head = ClusterHead::make(k, d, init_rng);
  model.out_w = Tensor2(1, k + model.conf_dim);
  {
    double bound = 1.0 / std::sqrt(static_cast<double>(k + model.conf_dim));
    for (double& v : model.out_w.data) v = init_rng.next_uniform(-bound, bound);
  }
  model.out_b = Tensor2(1, 1);

  std::vector<int> y(n);
  std::vector<std::vector<double>> conf(n);
  for (int i = 0; i < n; ++i) {
    y[i] = train.subjects[i].outcome;
    conf[i] = train.subjects[i].confounders;
  }

  // autoencoder pretraining pass
  {
    OptimizerState state = OptimizerState::for_params(model.ae.params(), hyper.lr);
    Rng shuffle_rng = root.fork(2);
    for (const auto& batch : detail::make_batches(n, hyper.batch_size, shuffle_rng)) {
      ad::Tape tape;
      AutoencoderGraph g(tape, model.ae);
      std::vector<ad::Var> recon;
      for (int i : batch) recon.push_back(g.recon_loss(train.subjects[i]));
      ad::Var loss = tape.scale(tape.add_scalars(recon),
                                1.0 / static_cast<double>(batch.size()));
      tape.backward(loss);
      std::vector<Tensor2> grads;
      for (ad::Var v : g.param_vars()) grads.push_back(tape.grad(v));
      adam_step(model.ae.params(), grads, state);
    }
  }

  Tensor2 z = encode_cohort(model.ae, train);
  std::vector<int> labels;
  PenaltyWorkspace ws = PenaltyWorkspace::make(k, model.conf_dim);
  const bool use_penalty = hyper.lambda4 > 0.0;
  OptimizerState state = OptimizerState::for_params(model.params(), hyper.lr);
  int global_epoch = 0;

  for (int it = 1; it <= hyper.n_iter; ++it) {
    KmeansResult km = kmeans(z, k, root.fork(0x1000 + static_cast<uint64_t>(it)).seed());
    if (!labels.empty()) {
      align_labels(labels, km.labels, km.centroids, k);
      int changed = 0;
      for (int i = 0; i < n; ++i) changed += km.labels[i] != labels[i];
      model.label_change_frac.push_back(static_cast<double>(changed) / n);
    } else {
      model.label_change_frac.push_back(1.0);
    }
    labels = km.labels;
    model.centroids = km.centroids;
    const double l_clustering = km.objective;

    bool iter_eligible;
    {
      SignificanceMatrix sig =
          significance_matrix(labels, conf, y, k, hyper.significance());
      iter_eligible = sig.eligible;
    }

    Rng shuffle_rng = root.fork(0x100 + static_cast<uint64_t>(it));
    for (int e = 0; e < hyper.n_epoch; ++e) {
      if (use_penalty) {
        std::vector<Tensor2> soft_all(n);
        for (int i = 0; i < n; ++i) {
          Tensor2 zi(d, 1);
          for (int j = 0; j < d; ++j) zi.data[j] = z.at(i, j);
          soft_all[i] = model.head.predict(zi);
        }
        ws.refresh(soft_all, conf, y, hyper.newton_refresh_steps);
      }

      double saved_lr = state.lr;
      for (const auto& batch : detail::make_batches(n, hyper.batch_size, shuffle_rng)) {
        std::vector<const Subject*> subjects;
        std::vector<int> pseudo;
        for (int i : batch) {
          subjects.push_back(&train.subjects[i]);
          pseudo.push_back(labels[i]);
        }
        double sum_scale = static_cast<double>(n) / batch.size();
        ad::Tape tape;
        JointGraph g = build_joint_graph(tape, model, subjects, pseudo,
                                         l_clustering,
                                         use_penalty ? &ws : nullptr, sum_scale);
        if (!std::isfinite(g.components.total)) {
          state.lr *= 0.5;
          continue;
        }
        tape.backward(g.total);
        std::vector<Tensor2> grads;
        for (ad::Var v : g.param_vars) grads.push_back(tape.grad(v));
        if (adam_step(model.params(), grads, state) ==
            StepStatus::kRejectedNonFinite)
          state.lr *= 0.5;
      }
      state.lr = saved_lr;

      // full-split components at the current parameters
      ++global_epoch;
      std::vector<const Subject*> all;
      std::vector<int> pseudo;
      for (int i = 0; i < n; ++i) {
        all.push_back(&train.subjects[i]);
        pseudo.push_back(labels[i]);
      }
      ad::Tape tape;
      JointGraph g = build_joint_graph(tape, model, all, pseudo, l_clustering,
                                       use_penalty ? &ws : nullptr, 1.0);
      TraceRow row;
      row.epoch = global_epoch;
      row.outer_iter = it;
      row.l_ae = g.components.l_ae;
      row.l_clustering = g.components.l_clustering;
      row.l1 = g.components.l1;
      row.l2 = g.components.l2;
      row.penalty = g.components.penalty;
      row.total = g.components.total;
      row.eligible = iter_eligible;
      if (!std::isfinite(row.total))
        throw NumericError("training diverged: non-finite joint loss at epoch " +
                           std::to_string(global_epoch));
      model.trace.push_back(row);
    }

    z = encode_cohort(model.ae, train);
  }

  // finalize: hard memberships from the cluster head, honest outcome head,
  // significance from scratch
  model.train_labels.assign(n, 0);
  model.train_soft.resize(n);
  for (int i = 0; i < n; ++i) {
    Tensor2 zi(d, 1);
    for (int j = 0; j < d; ++j) zi.data[j] = z.at(i, j);
    model.train_soft[i] = model.head.predict(zi);
    model.train_labels[i] = argmax_index(model.train_soft[i]);
  }

  detail::fit_reporting_head(model, y, conf);
  model.train_sig =
      significance_matrix(model.train_labels, conf, y, k, hyper.significance());
  model.eligible = model.train_sig.eligible;

  model.cluster_outcome_ratio.assign(k, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> sizes(k, 0);
  std::vector<int> hits(k, 0);
  for (int i = 0; i < n; ++i) {
    ++sizes[model.train_labels[i]];
    hits[model.train_labels[i]] += y[i];
  }
  for (int kk = 0; kk < k; ++kk)
    if (sizes[kk] > 0)
      model.cluster_outcome_ratio[kk] = static_cast<double>(hits[kk]) / sizes[kk];

  return model;
}

}  // namespace dice
