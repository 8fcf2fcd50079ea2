// Run configuration and end-to-end orchestration behind the CLI commands:
// synthesize or load a cohort, split it, search architectures, evaluate the
// winner plus baselines on the test split, and persist every artifact with
// a hashing manifest.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dice/baselines.hpp"
#include "dice/cohort.hpp"
#include "dice/report.hpp"
#include "dice/search.hpp"
#include "dice/serialize.hpp"
#include "dice/trainer.hpp"

namespace dice {

struct RunConfig {
  bool has_data = false;
  std::string features_path, outcomes_path;
  bool has_generator = false;
  GeneratorSpec generator;

  SearchSpace space{{2, 3, 4}, {8, 16}};
  DiceHyper hyper;
  std::vector<std::string> baselines = baseline_names();
  std::string out_dir = "out";
  bool wall_times = false;
  bool ablate = false;
  int threads = 0;
  uint64_t seed = 0;
};

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       const std::vector<std::string>& allowed,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
inline T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"data", "generator", "search", "hyper", "baselines",
                      "output", "seed", "ablate_significance", "threads"},
                     "config root");
  RunConfig c;
  if (j.contains("data")) {
    detail::check_keys(j.at("data"), {"features", "outcomes"}, "data");
    c.has_data = true;
    c.features_path = detail::get_or<std::string>(j.at("data"), "features", "");
    c.outcomes_path = detail::get_or<std::string>(j.at("data"), "outcomes", "");
    if (c.features_path.empty() || c.outcomes_path.empty())
      throw ConfigError("data section needs both 'features' and 'outcomes'");
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    detail::check_keys(g,
                       {"k_true", "per_cluster", "feature_dim", "seq_len_min",
                        "seq_len_max", "separation", "outcome_probs",
                        "confounder_dim"},
                       "generator");
    c.has_generator = true;
    c.generator.k_true = detail::get_or(g, "k_true", c.generator.k_true);
    c.generator.per_cluster = detail::get_or(g, "per_cluster", c.generator.per_cluster);
    c.generator.feature_dim = detail::get_or(g, "feature_dim", c.generator.feature_dim);
    c.generator.seq_len_min = detail::get_or(g, "seq_len_min", c.generator.seq_len_min);
    c.generator.seq_len_max = detail::get_or(g, "seq_len_max", c.generator.seq_len_max);
    c.generator.separation = detail::get_or(g, "separation", c.generator.separation);
    c.generator.outcome_probs =
        detail::get_or(g, "outcome_probs", c.generator.outcome_probs);
    c.generator.confounder_dim =
        detail::get_or(g, "confounder_dim", c.generator.confounder_dim);
    if (c.generator.outcome_probs.empty())
      throw ConfigError("generator needs 'outcome_probs'");
  }
  if (c.has_data == c.has_generator)
    throw ConfigError("config must contain exactly one of 'data' or 'generator'");

  if (j.contains("search")) {
    detail::check_keys(j.at("search"), {"k", "d"}, "search");
    c.space.k_values = detail::get_or(j.at("search"), "k", c.space.k_values);
    c.space.d_values = detail::get_or(j.at("search"), "d", c.space.d_values);
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    detail::check_keys(h,
                       {"lambda1", "lambda2", "lambda3", "lambda4", "alpha",
                        "alpha_g", "n_iter", "n_epoch", "lr", "batch_size",
                        "newton_refresh_steps"},
                       "hyper");
    c.hyper.lambda1 = detail::get_or(h, "lambda1", c.hyper.lambda1);
    c.hyper.lambda2 = detail::get_or(h, "lambda2", c.hyper.lambda2);
    c.hyper.lambda3 = detail::get_or(h, "lambda3", c.hyper.lambda3);
    c.hyper.lambda4 = detail::get_or(h, "lambda4", c.hyper.lambda4);
    c.hyper.n_iter = detail::get_or(h, "n_iter", c.hyper.n_iter);
    c.hyper.n_epoch = detail::get_or(h, "n_epoch", c.hyper.n_epoch);
    c.hyper.lr = detail::get_or(h, "lr", c.hyper.lr);
    c.hyper.batch_size = detail::get_or(h, "batch_size", c.hyper.batch_size);
    c.hyper.newton_refresh_steps =
        detail::get_or(h, "newton_refresh_steps", c.hyper.newton_refresh_steps);
    if (h.contains("alpha")) {
      c.hyper.alpha = h.at("alpha").get<double>();
      if (!(c.hyper.alpha > 0.0 && c.hyper.alpha < 1.0))
        throw ConfigError("hyper.alpha must lie in (0,1)");
      c.hyper.alpha_g = chi_square_isf_1df(c.hyper.alpha);
    }
    if (h.contains("alpha_g")) c.hyper.alpha_g = h.at("alpha_g").get<double>();
  }
  if (j.contains("baselines")) {
    c.baselines = j.at("baselines").get<std::vector<std::string>>();
    for (const auto& b : c.baselines) {
      bool known = false;
      for (const auto& n : baseline_names()) known = known || n == b;
      if (!known) throw ConfigError("unknown baseline '" + b + "'");
    }
  }
  if (j.contains("output")) {
    detail::check_keys(j.at("output"), {"dir", "wall_times"}, "output");
    c.out_dir = detail::get_or<std::string>(j.at("output"), "dir", c.out_dir);
    c.wall_times = detail::get_or(j.at("output"), "wall_times", c.wall_times);
  }
  c.seed = detail::get_or<uint64_t>(j, "seed", 0);
  c.ablate = detail::get_or(j, "ablate_significance", false);
  c.threads = detail::get_or(j, "threads", 0);
  c.hyper.seed = c.seed;
  c.hyper.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  return parse_run_config(j);
}

// Canonical JSON image of a config after overrides; hashed into the model
// artifact and embedded in the manifest.
inline nlohmann::json resolved_config_json(const RunConfig& c) {
  nlohmann::json j;
  if (c.has_data) j["data"] = {{"features", c.features_path}, {"outcomes", c.outcomes_path}};
  if (c.has_generator)
    j["generator"] = {{"k_true", c.generator.k_true},
                      {"per_cluster", c.generator.per_cluster},
                      {"feature_dim", c.generator.feature_dim},
                      {"seq_len_min", c.generator.seq_len_min},
                      {"seq_len_max", c.generator.seq_len_max},
                      {"separation", c.generator.separation},
                      {"outcome_probs", c.generator.outcome_probs},
                      {"confounder_dim", c.generator.confounder_dim}};
  j["search"] = {{"k", c.space.k_values}, {"d", c.space.d_values}};
  j["hyper"] = {{"lambda1", c.hyper.lambda1},
                {"lambda2", c.hyper.lambda2},
                {"lambda3", c.hyper.lambda3},
                {"lambda4", c.hyper.lambda4},
                {"alpha", c.hyper.alpha},
                {"alpha_g", c.hyper.alpha_g},
                {"n_iter", c.hyper.n_iter},
                {"n_epoch", c.hyper.n_epoch},
                {"lr", c.hyper.lr},
                {"batch_size", c.hyper.batch_size},
                {"newton_refresh_steps", c.hyper.newton_refresh_steps}};
  j["baselines"] = c.baselines;
  j["output"] = {{"dir", c.out_dir}, {"wall_times", c.wall_times}};
  j["seed"] = c.seed;
  j["ablate_significance"] = c.ablate;
  return j;
}

// ---- shared pipeline pieces -------------------------------------------------------

struct PipelineFiles {
  std::string dir;
  std::vector<std::string> files;

  std::string path(const std::string& name) {
    files.push_back(name);
    return dir + "/" + name;
  }
};

namespace detail {

inline Cohort obtain_cohort(const RunConfig& c, PipelineFiles* out) {
  if (c.has_data) return load_cohort(c.features_path, c.outcomes_path);
  Cohort cohort = synth_cohort(c.generator, c.seed);
  if (out) {
    write_cohort_csvs(cohort, out->path("features.csv"), out->path("outcomes.csv"));
    write_planted_csv(cohort, out->path("planted.csv"));
  }
  return cohort;
}

inline EvalInput dice_eval_input(const DiceModel& model, const Cohort& cohort,
                                 const std::string& split_name) {
  EvalInput in;
  in.method = "dice";
  in.split = split_name;
  in.k = model.k;
  in.d = model.d;
  in.eligible = model.eligible;
  in.sig_config = model.hyper.significance();
  in.z = Tensor2(cohort.size(), model.d);
  for (int i = 0; i < cohort.size(); ++i) {
    Prediction p = predict(model, cohort.subjects[i]);
    for (int jj = 0; jj < model.d; ++jj) in.z.at(i, jj) = p.z.data[jj];
    in.labels.push_back(p.hard);
    in.scores.push_back(p.outcome_prob);
  }
  return in;
}

// AUC of an exact logistic head fit on training-split codes z ⊕ v, applied
// to the evaluated split. Missing when the fit degenerates or the split has
// a single outcome class.
inline std::optional<double> representation_auc(const DiceModel& model,
                                                const Cohort& train,
                                                const EvalInput& in,
                                                const Cohort& eval_cohort) {
  Tensor2 zt = encode_cohort(model.ae, train);
  const int n = train.size();
  const int p = model.d + model.conf_dim + 1;
  if (n < p) return std::nullopt;
  Tensor2 design(n, p);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < model.d; ++j) design.at(i, j) = zt.at(i, j);
    for (int j = 0; j < model.conf_dim; ++j)
      design.at(i, model.d + j) = train.subjects[i].confounders[j];
    design.at(i, p - 1) = 1.0;
    y[i] = train.subjects[i].outcome;
  }
  LogisticFit fit;
  try {
    fit = fit_logistic(design, y);
  } catch (const Error&) {
    return std::nullopt;
  }
  std::vector<double> scores(eval_cohort.size());
  std::vector<int> ye(eval_cohort.size());
  int pos = 0;
  for (int i = 0; i < eval_cohort.size(); ++i) {
    double t = fit.coef[p - 1];
    for (int j = 0; j < model.d; ++j) t += fit.coef[j] * in.z.at(i, j);
    for (int j = 0; j < model.conf_dim; ++j)
      t += fit.coef[model.d + j] * eval_cohort.subjects[i].confounders[j];
    scores[i] = sigmoid(t);
    ye[i] = eval_cohort.subjects[i].outcome;
    pos += ye[i];
  }
  if (pos == 0 || pos == eval_cohort.size()) return std::nullopt;
  return roc_auc(scores, ye);
}

inline EvalInput baseline_eval_input(const BaselineModel& bm,
                                     const SplitCohort& split,
                                     const Cohort& cohort,
                                     const std::string& split_name,
                                     const SignificanceConfig& sig) {
  BaselineModel::Outputs out = bm.predict_cohort(cohort);
  EvalInput in;
  in.method = bm.method;
  in.split = split_name;
  in.k = bm.k;
  in.d = bm.d;
  in.sig_config = sig;
  in.z = std::move(out.z);
  in.labels = std::move(out.labels);
  in.scores = std::move(out.scores);
  // gate parity: baseline eligibility from its training-split memberships
  const Cohort& train = split.train;
  std::vector<int> y(train.size());
  std::vector<std::vector<double>> conf(train.size());
  for (int i = 0; i < train.size(); ++i) {
    y[i] = train.subjects[i].outcome;
    conf[i] = train.subjects[i].confounders;
  }
  int pos = 0;
  for (int v : y) pos += v;
  if (pos > 0 && pos < train.size())
    in.eligible =
        significance_matrix(bm.train_labels, conf, y, bm.k, sig).eligible;
  return in;
}

inline void write_projection_outputs(PipelineFiles& files,
                                     const std::vector<std::string>& ids,
                                     const Tensor2& z,
                                     const std::vector<int>& labels,
                                     const std::vector<int>& outcomes) {
  PcaProjection proj = pca_project(z);
  write_projection_csv(files.path("projection.csv"), ids, proj, labels, outcomes);
  OutcomeRatios ratios = outcome_ratio_by_cluster(
      labels, outcomes,
      labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1);
  write_text_file(files.path("projection.svg"),
                  render_projection_svg(proj, labels, ratios));
}

}  // namespace detail

struct RunOutputs {
  SearchResult search;
  std::vector<EvalReport> reports;  // dice first, then baselines
  std::string out_dir;
};

// The `run` command: full pipeline. `search_only` stops after the winning
// model and its artifacts (the `search` command).
inline RunOutputs run_pipeline(const RunConfig& config, bool search_only = false) {
  std::filesystem::create_directories(config.out_dir);
  PipelineFiles files{config.out_dir, {}};
  nlohmann::json resolved = resolved_config_json(config);
  const std::string fingerprint = fnv1a64_hex(resolved.dump());

  Cohort cohort = detail::obtain_cohort(config, &files);
  SplitCohort split = split_cohort(cohort, {4, 1, 1}, config.seed);

  SearchResult result;
  try {
    result = grid_search(split, config.space, config.hyper,
                         {config.ablate, config.threads});
  } catch (const NoEligibleCandidateError& e) {
    write_candidates_csv(files.dir + "/" + "candidates.csv", e.candidates,
                         config.ablate, config.wall_times);
    files.files.push_back("candidates.csv");
    write_manifest(files.dir, resolved, config.seed, files.files);
    throw;
  }

  write_candidates_csv(files.path("candidates.csv"), result.candidates,
                       config.ablate, config.wall_times);
  write_trace_csv(files.path("trace.csv"), result.selected_model.trace);
  save_model(result.selected_model, files.path("model.bin"), fingerprint);

  RunOutputs out;
  out.out_dir = config.out_dir;

  if (!search_only) {
    const DiceModel& model = result.selected_model;
    EvalInput dice_in = detail::dice_eval_input(model, split.test, "test");
    EvalReport dice_report = evaluate(dice_in, split.test);
    dice_report.auc_representation =
        detail::representation_auc(model, split.train, dice_in, split.test);
    write_eval_json(files.path("eval_dice.json"), dice_report);
    out.reports.push_back(dice_report);

    // validation-split report: the AUC the search selected on, plus the
    // significance matrix recomputed on validation memberships
    EvalInput val_in =
        detail::dice_eval_input(model, split.validation, "validation");
    EvalReport val_report = evaluate(val_in, split.validation);
    val_report.auc_representation =
        detail::representation_auc(model, split.train, val_in, split.validation);
    write_eval_json(files.path("eval_dice_val.json"), val_report);

    for (const std::string& method : config.baselines) {
      DiceHyper bh = config.hyper;
      bh.seed = result.selected().seed;  // same stream as the winning model
      BaselineModel bm =
          run_baseline(split, method, model.k, model.d, bh);
      EvalInput in = detail::baseline_eval_input(bm, split, split.test, "test",
                                                 config.hyper.significance());
      EvalReport report = evaluate(in, split.test);
      write_eval_json(files.path("eval_" + method + ".json"), report);
      out.reports.push_back(report);
    }

    write_method_tables(files.path("table_clustering.csv"),
                        files.path("table_classification.csv"), out.reports);

    std::vector<std::string> ids;
    std::vector<int> outcomes;
    for (const auto& s : split.test.subjects) {
      ids.push_back(s.id);
      outcomes.push_back(s.outcome);
    }
    detail::write_projection_outputs(files, ids, dice_in.z, dice_in.labels,
                                     outcomes);
  }

  write_manifest(files.dir, resolved, config.seed, files.files);
  out.search = std::move(result);
  return out;
}

// The `synth` command: just generate and persist a cohort.
inline void run_synth(const RunConfig& config) {
  if (!config.has_generator)
    throw ConfigError("synth needs a 'generator' section in the config");
  std::filesystem::create_directories(config.out_dir);
  PipelineFiles files{config.out_dir, {}};
  detail::obtain_cohort(config, &files);
  write_manifest(files.dir, resolved_config_json(config), config.seed,
                 files.files);
}

// The `train` command: single fixed architecture, no gate.
inline DiceModel run_train(const RunConfig& config) {
  if (config.space.k_values.size() != 1 || config.space.d_values.size() != 1)
    throw ConfigError("train expects exactly one K and one d in the search space");
  std::filesystem::create_directories(config.out_dir);
  PipelineFiles files{config.out_dir, {}};
  nlohmann::json resolved = resolved_config_json(config);

  Cohort cohort = detail::obtain_cohort(config, &files);
  SplitCohort split = split_cohort(cohort, {4, 1, 1}, config.seed);
  const int k = config.space.k_values[0], d = config.space.d_values[0];
  DiceHyper h = config.hyper;
  if (config.ablate) h.lambda4 = 0.0;
  h.seed = candidate_seed(config.seed, k, d);
  DiceModel model = train_dice(split, k, d, h);

  write_trace_csv(files.path("trace.csv"), model.trace);
  save_model(model, files.path("model.bin"), fnv1a64_hex(resolved.dump()));
  write_manifest(files.dir, resolved, config.seed, files.files);
  return model;
}

// The `eval` command: score a stored model's test-split behavior on a
// config's data using the artifact's own normalization.
inline EvalReport run_eval(const RunConfig& config, const std::string& model_path) {
  DiceModel model = load_model(model_path);
  std::filesystem::create_directories(config.out_dir);
  PipelineFiles files{config.out_dir, {}};

  Cohort cohort = config.has_data
                      ? load_cohort(config.features_path, config.outcomes_path)
                      : synth_cohort(config.generator, config.seed);
  SplitCohort split =
      split_cohort(cohort, {4, 1, 1}, config.seed, &model.normalization);
  EvalInput in = detail::dice_eval_input(model, split.test, "test");
  EvalReport report = evaluate(in, split.test);
  report.auc_representation =
      detail::representation_auc(model, split.train, in, split.test);
  write_eval_json(files.path("eval_dice.json"), report);
  write_manifest(files.dir, resolved_config_json(config), config.seed,
                 files.files);
  return report;
}

// The `project` command: whole-cohort latent scatter for a stored model.
inline void run_project(const RunConfig& config, const std::string& model_path) {
  DiceModel model = load_model(model_path);
  std::filesystem::create_directories(config.out_dir);
  PipelineFiles files{config.out_dir, {}};

  Cohort cohort = config.has_data
                      ? load_cohort(config.features_path, config.outcomes_path)
                      : synth_cohort(config.generator, config.seed);
  apply_normalization(cohort, model.normalization);
  std::vector<std::string> ids;
  std::vector<int> labels, outcomes;
  Tensor2 z(cohort.size(), model.d);
  for (int i = 0; i < cohort.size(); ++i) {
    Prediction p = predict(model, cohort.subjects[i]);
    for (int j = 0; j < model.d; ++j) z.at(i, j) = p.z.data[j];
    ids.push_back(cohort.subjects[i].id);
    labels.push_back(p.hard);
    outcomes.push_back(cohort.subjects[i].outcome);
  }
  detail::write_projection_outputs(files, ids, z, labels, outcomes);
  write_manifest(files.dir, resolved_config_json(config), config.seed,
                 files.files);
}

// The `predict` command: per-subject clusters, risk ranks, and outcome
// probabilities for a features CSV (outcomes CSV optional, for confounders).
inline void run_predict(const std::string& model_path,
                        const std::string& features_path,
                        const std::string& outcomes_path,
                        const std::string& out_dir) {
  DiceModel model = load_model(model_path);
  std::filesystem::create_directories(out_dir);
  PipelineFiles files{out_dir, {}};

  Cohort cohort = load_features(features_path);
  if (!outcomes_path.empty()) join_outcomes(cohort, outcomes_path);
  apply_normalization(cohort, model.normalization);
  std::vector<std::string> ids;
  std::vector<Prediction> preds;
  for (auto& s : cohort.subjects) {
    if (static_cast<int>(s.confounders.size()) != model.conf_dim)
      s.confounders.assign(model.conf_dim, 0.0);  // unknown confounders
    ids.push_back(s.id);
    preds.push_back(predict(model, s));
  }
  write_predictions_csv(files.path("predictions.csv"), ids, preds,
                        model.cluster_outcome_ratio);
  nlohmann::json cfg = {{"model", model_path},
                        {"features", features_path},
                        {"outcomes", outcomes_path}};
  write_manifest(files.dir, cfg, model.hyper.seed, files.files);
}

}  // namespace dice
