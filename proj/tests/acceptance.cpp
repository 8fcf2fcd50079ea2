// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails. Tolerances are pinned
// here, next to the checks that use them.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dice/dice.hpp"
#include "support/oracles.hpp"

#ifndef DICE_CLI_PATH
#error "DICE_CLI_PATH must point at the built executable"
#endif

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(DICE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::vector<std::vector<double>> rows_of(const dice::Tensor2& m) {
  std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out[i][j] = m.at(i, j);
  return out;
}

fs::path scratch_dir() {
  fs::path p = fs::temp_directory_path() / "dice_acceptance";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// column -> fraction of rows with value "yes"
double yes_fraction(const std::string& csv, const std::string& column,
                    int* rows_out = nullptr) {
  std::vector<std::string> lines;
  size_t at = 0;
  while (at < csv.size()) {
    size_t nl = csv.find('\n', at);
    if (nl == std::string::npos) nl = csv.size();
    if (nl > at) lines.push_back(csv.substr(at, nl - at));
    at = nl + 1;
  }
  if (lines.empty()) return -1.0;
  std::vector<std::string> header = dice::split_csv_line(lines[0]);
  int col = -1;
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) col = static_cast<int>(i);
  if (col < 0) return -1.0;
  int yes = 0;
  for (size_t i = 1; i < lines.size(); ++i)
    if (dice::split_csv_line(lines[i]).at(col) == "yes") ++yes;
  if (rows_out) *rows_out = static_cast<int>(lines.size()) - 1;
  return lines.size() > 1 ? static_cast<double>(yes) / (lines.size() - 1) : -1.0;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

void report(int index, const char* name, const Outcome& o) {
  std::printf("criterion %d (%s): %s%s%s\n", index, name,
              o.ok ? "PASS" : "FAIL", o.detail.empty() ? "" : " — ",
              o.detail.c_str());
  std::fflush(stdout);
}

// ---- criterion 1: gradient fidelity ---------------------------------------------

struct GradProbe {
  dice::DiceModel model;
  std::vector<const dice::Subject*> batch;
  std::vector<int> pseudo;
  std::vector<std::vector<double>> conf;
  std::vector<int> y;
};

GradProbe make_probe() {
  dice::GeneratorSpec spec;
  spec.k_true = 2;
  spec.per_cluster = 8;
  spec.feature_dim = 3;
  spec.seq_len_min = 2;
  spec.seq_len_max = 3;
  spec.separation = 1.0;
  spec.outcome_probs = {0.7, 0.3};
  spec.confounder_dim = 1;
  static dice::Cohort cohort = dice::synth_cohort(spec, 101);

  GradProbe p;
  p.model.kind = dice::CohortKind::kSequence;
  p.model.k = 2;
  p.model.d = 2;
  p.model.feature_dim = cohort.feature_dim();
  p.model.conf_dim = cohort.confounder_dim();
  dice::Rng r(202);
  p.model.ae = dice::Autoencoder::make(dice::CohortKind::kSequence,
                                       p.model.feature_dim, 2, r);
  p.model.head = dice::ClusterHead::make(2, 2, r);
  p.model.out_w = dice::Tensor2(1, 2 + p.model.conf_dim);
  p.model.out_b = dice::Tensor2(1, 1);
  for (int i = 0; i < 8; ++i) {
    p.batch.push_back(&cohort.subjects[i]);
    p.pseudo.push_back(i % 2);
    p.conf.push_back(cohort.subjects[i].confounders);
    p.y.push_back(i % 3 == 0 ? 1 : 0);
  }
  return p;
}

enum class Objective { kRecon, kClusterCe, kOutcome, kTotal };

double objective_value(const dice::LossComponents& c, Objective o) {
  switch (o) {
    case Objective::kRecon: return c.l_ae;
    case Objective::kClusterCe: return c.l1;
    case Objective::kOutcome: return c.l2;
    case Objective::kTotal: return c.total;
  }
  return 0.0;
}

dice::DiceHyper objective_hyper(Objective o) {
  dice::DiceHyper h;
  if (o != Objective::kTotal) {
    h.lambda1 = o == Objective::kRecon ? 1.0 : 0.0;
    h.lambda2 = o == Objective::kClusterCe ? 1.0 : 0.0;
    h.lambda3 = o == Objective::kOutcome ? 1.0 : 0.0;
    h.lambda4 = 0.0;
  }
  return h;
}

Outcome criterion1() {
  auto t0 = Clock::now();
  GradProbe probe = make_probe();
  dice::Rng rng(307);
  double worst = 0.0;

  const Objective objectives[] = {Objective::kRecon, Objective::kClusterCe,
                                  Objective::kOutcome, Objective::kTotal};
  for (Objective o : objectives) {
    dice::DiceModel& m = probe.model;
    m.hyper = objective_hyper(o);
    const bool penalized = o == Objective::kTotal;
    for (int point = 0; point < 10; ++point) {
      dice::PenaltyWorkspace ws =
          dice::PenaltyWorkspace::make(m.k, m.conf_dim);
      for (int tries = 0;; ++tries) {
        for (dice::Tensor2* p : m.params())
          for (double& v : p->data) v = rng.next_uniform(-0.6, 0.6);
        if (!penalized) break;
        std::vector<dice::Tensor2> soft;
        for (const dice::Subject* s : probe.batch)
          soft.push_back(m.head.predict(dice::encode_subject(m.ae, *s)));
        ws.refresh(soft, probe.conf, probe.y, 50);
        dice::ad::Tape tape;
        dice::JointGraph g = dice::build_joint_graph(tape, m, probe.batch,
                                                     probe.pseudo, 0.5, &ws, 1.0);
        // stay clear of the hinge kink so central differences are valid
        if (g.components.penalty > 1e-3) break;
        if (tries > 50) return {false, "could not find a hinge-active point"};
      }

      std::vector<double> analytic;
      {
        dice::ad::Tape tape;
        dice::JointGraph g =
            dice::build_joint_graph(tape, m, probe.batch, probe.pseudo, 0.5,
                                    penalized ? &ws : nullptr, 1.0);
        tape.backward(g.total);
        for (dice::ad::Var v : g.param_vars) {
          dice::Tensor2 grad = tape.grad(v);
          analytic.insert(analytic.end(), grad.data.begin(), grad.data.end());
        }
      }

      std::vector<double> base = dice::flatten_params(m.params());
      std::vector<double> fd(base.size());
      const double eps = 1e-5;
      for (size_t i = 0; i < base.size(); ++i) {
        double lo, hi;
        std::vector<double> probe_theta = base;
        probe_theta[i] = base[i] + eps;
        dice::unflatten_params(probe_theta, m.params());
        {
          dice::ad::Tape tape;
          dice::JointGraph g =
              dice::build_joint_graph(tape, m, probe.batch, probe.pseudo, 0.5,
                                      penalized ? &ws : nullptr, 1.0);
          hi = objective_value(g.components, o);
        }
        probe_theta[i] = base[i] - eps;
        dice::unflatten_params(probe_theta, m.params());
        {
          dice::ad::Tape tape;
          dice::JointGraph g =
              dice::build_joint_graph(tape, m, probe.batch, probe.pseudo, 0.5,
                                      penalized ? &ws : nullptr, 1.0);
          lo = objective_value(g.components, o);
        }
        fd[i] = (hi - lo) / (2.0 * eps);
      }
      dice::unflatten_params(base, m.params());
      worst = std::max(worst, oracle::rel_err(analytic, fd));
    }
  }

  double elapsed = secs_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max relative error %.2e, %.1fs", worst,
                elapsed);
  return {worst < 1e-4 && elapsed < 30.0, buf};
}

// ---- criterion 2: statistical core ----------------------------------------------

Outcome criterion2() {
  double p_crit = dice::chi_square_sf_1df(3.841);
  if (std::fabs(p_crit - 0.0500) > 5e-4)
    return {false, "sf(3.841)=" + dice::fmt_double(p_crit)};

  dice::Rng rng(303);
  for (int i = 0; i < 100; ++i) {
    int n = 30 + static_cast<int>(rng.next_below(31));
    int k = 2 + static_cast<int>(rng.next_below(2));
    std::vector<int> labels, y;
    for (;;) {
      labels.clear();
      y.clear();
      std::vector<int> count(k, 0);
      int ones = 0;
      for (int j = 0; j < n; ++j) {
        int lab = static_cast<int>(rng.next_below(static_cast<uint64_t>(k)));
        int out = rng.next_double() < 0.4 ? 1 : 0;
        labels.push_back(lab);
        y.push_back(out);
        ++count[lab];
        ones += out;
      }
      bool full = ones > 0 && ones < n;
      for (int c : count) full = full && c >= 2;
      if (full) break;
    }
    std::vector<std::vector<double>> conf(n);
    for (auto& row : conf) row = {rng.next_normal()};
    int k1 = static_cast<int>(rng.next_below(static_cast<uint64_t>(k)));
    int k2 = (k1 + 1) % k;
    double g12 = dice::likelihood_ratio(labels, conf, y, k, k1, k2);
    double g21 = dice::likelihood_ratio(labels, conf, y, k, k2, k1);
    if (g12 < -1e-6) return {false, "negative G at fixture " + std::to_string(i)};
    if (std::fabs(g12 - g21) > 1e-6)
      return {false, "asymmetric G at fixture " + std::to_string(i)};
  }

  dice::Rng gen(404);
  const int n = 5000;
  dice::Tensor2 design(n, 3);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    double x1 = gen.next_normal(), x2 = gen.next_normal();
    design.at(i, 0) = x1;
    design.at(i, 1) = x2;
    design.at(i, 2) = 1.0;
    double p = dice::sigmoid(2.0 * x1 - 1.0 * x2);
    y[i] = gen.next_double() < p ? 1 : 0;
  }
  dice::LogisticFit fit = dice::fit_logistic(design, y);
  oracle::IrlsFit ref = oracle::irls_logistic(rows_of(design), y);
  if (std::fabs(fit.coef[0] - 2.0) > 0.15 || std::fabs(fit.coef[1] + 1.0) > 0.15)
    return {false, "recovered (" + dice::fmt_double(fit.coef[0]) + ", " +
                       dice::fmt_double(fit.coef[1]) + ")"};
  for (int j = 0; j < 3; ++j)
    if (std::fabs(fit.coef[j] - ref.coef[j]) > 1e-6)
      return {false, "fit disagrees with the reweighted oracle"};
  char buf[96];
  std::snprintf(buf, sizeof(buf), "sf=%.4f, coef=(%.3f, %.3f)", p_crit,
                fit.coef[0], fit.coef[1]);
  return {true, buf};
}

// ---- criterion 3: oracle equivalence --------------------------------------------

Outcome criterion3() {
  dice::Rng rng(505);
  for (int i = 0; i < 25; ++i) {
    int n = 4 + static_cast<int>(rng.next_below(7));
    int k = 2 + static_cast<int>(rng.next_below(2));
    int d = 1 + static_cast<int>(rng.next_below(3));
    dice::Tensor2 z(n, d);
    for (double& v : z.data) v = rng.next_uniform(-3.0, 3.0);
    dice::KmeansResult km = dice::kmeans(z, k, rng.next_u64(), 10);
    double opt = oracle::exhaustive_kmeans_objective(rows_of(z), k);
    if (std::fabs(km.objective - opt) > 1e-9)
      return {false, "kmeans missed the optimum on fixture " + std::to_string(i)};
  }

  dice::Tensor2 four(4, 2);
  four.at(0, 0) = 0.0;
  four.at(0, 1) = 0.0;
  four.at(1, 0) = 0.0;
  four.at(1, 1) = 1.0;
  four.at(2, 0) = 10.0;
  four.at(2, 1) = 0.0;
  four.at(3, 0) = 10.0;
  four.at(3, 1) = 1.0;
  std::vector<int> four_labels = {0, 0, 1, 1};
  std::vector<std::vector<double>> four_pts = rows_of(four);
  dice::ClusterIndices got = dice::clustering_indices(four, four_labels);
  if (std::fabs(got.silhouette -
                oracle::brute_silhouette(four_pts, four_labels, 2)) > 1e-9 ||
      std::fabs(got.calinski_harabasz -
                oracle::brute_calinski_harabasz(four_pts, four_labels, 2)) >
          1e-9 ||
      std::fabs(got.davies_bouldin -
                oracle::brute_davies_bouldin(four_pts, four_labels, 2)) > 1e-9)
    return {false, "indices disagree with the oracle on the 4-point fixture"};
  if (std::fabs(got.silhouette - 0.9002) > 1e-4 ||
      std::fabs(got.calinski_harabasz - 200.0) > 1e-9 ||
      std::fabs(got.davies_bouldin - 0.1) > 1e-9)
    return {false, "4-point fixture values drifted"};

  for (int i = 0; i < 30; ++i) {
    int n = 4 + static_cast<int>(rng.next_below(9));
    int k = 2 + static_cast<int>(rng.next_below(2));
    if (k > n) k = n;
    dice::Tensor2 z(n, 2);
    for (double& v : z.data) v = rng.next_uniform(-2.0, 2.0);
    std::vector<int> labels(n);
    for (int j = 0; j < n; ++j) labels[j] = j % k;
    rng.shuffle(labels);
    std::vector<std::vector<double>> pts = rows_of(z);
    dice::ClusterIndices idx = dice::clustering_indices(z, labels);
    if (std::fabs(idx.silhouette - oracle::brute_silhouette(pts, labels, k)) >
            1e-9 ||
        std::fabs(idx.calinski_harabasz -
                  oracle::brute_calinski_harabasz(pts, labels, k)) > 1e-9 ||
        std::fabs(idx.davies_bouldin -
                  oracle::brute_davies_bouldin(pts, labels, k)) > 1e-9)
      return {false, "index fixture " + std::to_string(i) + " disagrees"};
  }

  for (int i = 0; i < 200; ++i) {
    int n = 3 + static_cast<int>(rng.next_below(30));
    std::vector<double> scores(n);
    std::vector<int> y(n);
    bool discrete = i % 2 == 0;
    for (;;) {
      int ones = 0;
      for (int j = 0; j < n; ++j) {
        scores[j] = discrete ? 0.25 * static_cast<double>(rng.next_below(5))
                             : rng.next_double();
        y[j] = rng.next_double() < 0.5 ? 1 : 0;
        ones += y[j];
      }
      if (ones > 0 && ones < n) break;
    }
    if (dice::roc_auc(scores, y) != oracle::pairwise_auc(scores, y))
      return {false, "auc differs from pair counting on instance " +
                         std::to_string(i)};
  }
  return {true, "kmeans, indices, and auc all match their oracles"};
}

// ---- criteria 4 & 5: planted recovery and outcome-aware advantage ----------------

struct SeedRun {
  bool recovered = false;
  bool advantage = false;
  int k_star = 0;
  double ari = 0.0;
};

SeedRun run_planted_seed(uint64_t seed) {
  dice::GeneratorSpec spec;  // defaults: K_true=3, 200/cluster, separation 4
  spec.outcome_probs = {0.8, 0.4, 0.1};
  dice::Cohort cohort = dice::synth_cohort(spec, seed);
  dice::SplitCohort split = dice::split_cohort(cohort, {4, 1, 1}, seed);

  dice::DiceHyper h;
  h.n_iter = 12;
  h.n_epoch = 1;
  h.lr = 5e-3;
  h.seed = seed;
  dice::SearchSpace space{{2, 3, 4}, {8, 16}};
  dice::SearchOptions opts;
  opts.threads = 1;

  SeedRun out;
  dice::SearchResult result;
  try {
    result = dice::grid_search(split, space, h, opts);
  } catch (const dice::NoEligibleCandidateError&) {
    return out;
  }
  const dice::DiceModel& m = result.selected_model;
  out.k_star = result.selected().k;

  const dice::Cohort& test = split.test;
  std::vector<int> labels, truth, y;
  std::vector<double> scores;
  dice::Tensor2 z(test.size(), m.d);
  for (int i = 0; i < test.size(); ++i) {
    dice::Prediction p = dice::predict(m, test.subjects[i]);
    labels.push_back(p.hard);
    scores.push_back(p.outcome_prob);
    truth.push_back(*test.subjects[i].planted_cluster);
    y.push_back(test.subjects[i].outcome);
    for (int j = 0; j < m.d; ++j) z.at(i, j) = p.z.data[j];
  }
  out.ari = dice::adjusted_rand_index(truth, labels);

  std::vector<std::vector<double>> conf;
  for (const auto& s : test.subjects) conf.push_back(s.confounders);
  dice::SignificanceMatrix sig =
      dice::significance_matrix(labels, conf, y, m.k, {0.05, 3.841});
  bool all_pairs_significant = sig.defined;
  for (int a = 0; a < m.k && all_pairs_significant; ++a)
    for (int b = a + 1; b < m.k; ++b)
      if (!(sig.p.at(a, b) < 0.05)) all_pairs_significant = false;
  out.recovered = out.k_star == 3 && out.ari >= 0.7 && all_pairs_significant;

  dice::DiceHyper hb = h;
  hb.seed = result.selected().seed;
  dice::BaselineModel base =
      dice::run_baseline(split, "ae_kmeans", m.k, m.d, hb);
  dice::BaselineModel::Outputs bo = base.predict_cohort(test);

  double spread_dice = dice::outcome_ratio_by_cluster(labels, y, m.k).spread;
  double spread_base = dice::outcome_ratio_by_cluster(bo.labels, y, m.k).spread;
  double sil_dice, sil_base;
  try {
    sil_dice = dice::clustering_indices(z, labels).silhouette;
    sil_base = dice::clustering_indices(bo.z, bo.labels).silhouette;
  } catch (const dice::Error&) {
    return out;  // collapsed clustering on either side: no advantage credit
  }
  out.advantage = spread_dice >= spread_base && sil_dice >= sil_base;
  return out;
}

void criteria4and5(Outcome* c4, Outcome* c5) {
  auto t0 = Clock::now();
  int recovered = 0, advantage = 0;
  std::string ks, aris;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    SeedRun r = run_planted_seed(seed);
    recovered += r.recovered;
    advantage += r.advantage;
    ks += (ks.empty() ? "" : ",") + std::to_string(r.k_star);
    aris += (aris.empty() ? "" : ",") + dice::fmt_fixed(r.ari, 2);
  }
  double elapsed = secs_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d/5 seeds, K*={%s}, ARI={%s}, %.0fs",
                recovered, ks.c_str(), aris.c_str(), elapsed);
  *c4 = {recovered >= 4 && elapsed < 300.0, buf};
  std::snprintf(buf, sizeof(buf), "%d/5 seeds beat ae_kmeans on spread and silhouette",
                advantage);
  *c5 = {advantage >= 4, buf};
}

// ---- criterion 6: ablation behavior ---------------------------------------------

Outcome criterion6() {
  fs::path root = scratch_dir() / "ablation";
  fs::create_directories(root);
  int total_rows = 0;
  int constrained_yes = 0, ablated_yes = 0;
  for (uint64_t seed : {11, 12, 13}) {
    std::string out_c = (root / ("c" + std::to_string(seed))).string();
    std::string out_a = (root / ("a" + std::to_string(seed))).string();
    std::string cfg_path = (root / ("cfg" + std::to_string(seed) + ".json")).string();
    std::string cfg =
        "{\n"
        "  \"generator\": {\"k_true\": 3, \"per_cluster\": 50, \"feature_dim\": 4,\n"
        "                \"seq_len_min\": 2, \"seq_len_max\": 3, \"separation\": 2.0,\n"
        "                \"outcome_probs\": [0.8, 0.45, 0.25], \"confounder_dim\": 1},\n"
        "  \"search\": {\"k\": [2, 3, 4], \"d\": [4]},\n"
        "  \"hyper\": {\"n_iter\": 10, \"n_epoch\": 2, \"lr\": 0.01, \"batch_size\": 8},\n"
        "  \"threads\": 1,\n"
        "  \"seed\": " + std::to_string(seed) + "\n"
        "}\n";
    dice::write_text_file(cfg_path, cfg);

    int rc_c = run_cli("search --config " + cfg_path + " --out " + out_c);
    if (rc_c != 0 && rc_c != 4)
      return {false, "constrained search failed with status " + std::to_string(rc_c)};
    int rc_a = run_cli("search --config " + cfg_path + " --ablate-significance --out " + out_a);
    if (rc_a != 0)
      return {false, "ablated search failed with status " + std::to_string(rc_a)};

    std::string table_c = slurp(out_c + "/candidates.csv");
    std::string table_a = slurp(out_a + "/candidates.csv");
    if (table_c.empty() || table_a.empty())
      return {false, "missing candidate table for seed " + std::to_string(seed)};
    int rows = 0;
    double fc = yes_fraction(table_c, "eligible", &rows);
    double fa = yes_fraction(table_a, "would_be_eligible");
    if (fc < 0.0 || fa < 0.0 || rows != 3)
      return {false, "unparsable candidate table for seed " + std::to_string(seed)};
    total_rows += rows;
    constrained_yes += static_cast<int>(std::lround(fc * rows));
    ablated_yes += static_cast<int>(std::lround(fa * rows));
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "significant candidates: ablated %d/%d vs constrained %d/%d",
                ablated_yes, total_rows, constrained_yes, total_rows);
  return {ablated_yes <= constrained_yes, buf};
}

// ---- criterion 7: determinism and persistence ------------------------------------

Outcome criterion7() {
  fs::path root = scratch_dir() / "determinism";
  fs::create_directories(root);
  std::string out_dir = (root / "out").string();
  std::string cfg_path = (root / "cfg.json").string();
  dice::write_text_file(
      cfg_path,
      "{\n"
      "  \"generator\": {\"k_true\": 2, \"per_cluster\": 30, \"feature_dim\": 3,\n"
      "                \"seq_len_min\": 2, \"seq_len_max\": 3, \"separation\": 4.0,\n"
      "                \"outcome_probs\": [0.85, 0.15], \"confounder_dim\": 1},\n"
      "  \"search\": {\"k\": [2], \"d\": [2]},\n"
      "  \"hyper\": {\"n_iter\": 20, \"n_epoch\": 2, \"lr\": 0.01, \"batch_size\": 8},\n"
      "  \"baselines\": [\"pca_kmeans\"],\n"
      "  \"output\": {\"dir\": \"" + out_dir + "\"},\n"
      "  \"threads\": 1,\n"
      "  \"seed\": 2026\n"
      "}\n");
  if (run_cli("run --config " + cfg_path) != 0)
    return {false, "first run failed"};
  std::map<std::string, std::string> snapshot;
  for (const auto& entry : fs::directory_iterator(out_dir))
    if (entry.is_regular_file())
      snapshot[entry.path().filename().string()] = slurp(entry.path().string());
  if (snapshot.size() < 8) return {false, "first run produced too few outputs"};
  if (run_cli("run --config " + cfg_path) != 0)
    return {false, "second run failed"};
  for (const auto& [name, bytes] : snapshot)
    if (slurp((fs::path(out_dir) / name).string()) != bytes)
      return {false, name + " differs between identical runs"};

  dice::GeneratorSpec spec;
  spec.k_true = 2;
  spec.per_cluster = 30;
  spec.feature_dim = 3;
  spec.seq_len_min = 2;
  spec.seq_len_max = 3;
  spec.separation = 4.0;
  spec.outcome_probs = {0.85, 0.15};
  spec.confounder_dim = 1;
  dice::Cohort cohort = dice::synth_cohort(spec, 77);
  dice::SplitCohort split = dice::split_cohort(cohort, {4, 1, 1}, 77);
  dice::DiceHyper h;
  h.n_iter = 2;
  h.seed = 77;
  dice::DiceModel m = dice::train_dice(split, 2, 2, h);
  std::string artifact = (root / "model.bin").string();
  dice::save_model(m, artifact);
  dice::DiceModel r = dice::load_model(artifact);
  int checked = 0;
  for (const dice::Subject& s : split.test.subjects) {
    if (checked == 10) break;
    dice::Prediction a = dice::predict(m, s);
    dice::Prediction b = dice::predict(r, s);
    if (a.hard != b.hard || a.outcome_prob != b.outcome_prob ||
        a.z.data != b.z.data || a.soft.data != b.soft.data)
      return {false, "round-tripped predictions drifted"};
    ++checked;
  }
  if (checked < 10) return {false, "needed 10 round-trip subjects"};
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "%zu files byte-identical, 10 predictions bit-exact",
                snapshot.size());
  return {true, buf};
}

// ---- criterion 8: pipeline robustness --------------------------------------------

Outcome criterion8() {
  dice::GeneratorSpec spec;
  spec.k_true = 2;
  spec.per_cluster = 30;
  spec.feature_dim = 3;
  spec.seq_len_min = 2;
  spec.seq_len_max = 3;
  spec.separation = 0.0;
  spec.outcome_probs = {0.5, 0.5};
  spec.confounder_dim = 1;
  dice::Cohort cohort = dice::synth_cohort(spec, 3);
  dice::SplitCohort split = dice::split_cohort(cohort, {4, 1, 1}, 3);
  dice::DiceHyper h;
  h.n_iter = 3;
  h.lambda4 = 0.0;
  h.seed = 3;
  dice::DiceModel m;
  try {
    m = dice::train_dice(split, 2, 2, h);
  } catch (const std::exception& e) {
    return {false, std::string("separation-0 training crashed: ") + e.what()};
  }
  if (m.eligible) return {false, "separation-0 cohort reported eligibility"};
  if (m.trace.size() != 3) return {false, "training ended early"};

  fs::path root = scratch_dir() / "robustness";
  fs::create_directories(root);
  std::string cfg_path = (root / "cfg.json").string();
  std::string out_dir = (root / "out").string();
  dice::write_text_file(
      cfg_path,
      "{\n"
      "  \"generator\": {\"k_true\": 2, \"per_cluster\": 24, \"feature_dim\": 3,\n"
      "                \"seq_len_min\": 2, \"seq_len_max\": 3, \"separation\": 4.0,\n"
      "                \"outcome_probs\": [0.85, 0.15], \"confounder_dim\": 1},\n"
      "  \"search\": {\"k\": [2], \"d\": [2]},\n"
      "  \"hyper\": {\"n_iter\": 2, \"alpha_g\": 1e9},\n"
      "  \"output\": {\"dir\": \"" + out_dir + "\"},\n"
      "  \"threads\": 1,\n"
      "  \"seed\": 5\n"
      "}\n");
  int rc = run_cli("search --config " + cfg_path);
  if (rc != 4)
    return {false, "infeasible search exited " + std::to_string(rc) +
                       ", expected 4"};
  if (!fs::exists(out_dir + "/candidates.csv"))
    return {false, "infeasible search left no candidate table"};
  return {true, "ineligible training completes; infeasible search exits 4"};
}

}  // namespace

int main() {
  std::printf("acceptance checks (cli: %s)\n", DICE_CLI_PATH);
  Outcome results[8];
  try {
    results[0] = criterion1();
    report(1, "gradient fidelity", results[0]);
    results[1] = criterion2();
    report(2, "statistical core", results[1]);
    results[2] = criterion3();
    report(3, "oracle equivalence", results[2]);
    criteria4and5(&results[3], &results[4]);
    report(4, "planted-strata recovery", results[3]);
    report(5, "outcome-aware advantage", results[4]);
    results[5] = criterion6();
    report(6, "ablation behavior", results[5]);
    results[6] = criterion7();
    report(7, "determinism and persistence", results[6]);
    results[7] = criterion8();
    report(8, "pipeline robustness", results[7]);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  int failed = 0;
  for (const Outcome& o : results) failed += !o.ok;
  std::printf("%d/8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
