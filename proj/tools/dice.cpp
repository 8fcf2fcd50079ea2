// dice: significance-constrained deep clustering of outcome-labelled cohorts.
//
// Exit codes: 0 ok, 2 bad config/usage, 3 bad data, 4 no candidate passed the
// significance gate, 5 numeric failure.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dice/dice.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  bool ablate = false;
  std::vector<std::string> baselines;
  std::vector<int> k_grid, d_grid;
  int threads = 0;
};

void add_config_opts(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
  auto* c = cmd->add_option("--config", o.config_path, "JSON run configuration");
  if (config_required) c->required();
  o.seed_opt = cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out", o.out_dir, "override the output directory");
}

void add_search_opts(CLI::App* cmd, CommonOpts& o) {
  cmd->add_flag("--ablate-significance", o.ablate,
                "drop the significance constraint (diagnostics still reported)");
  cmd->add_option("--k-grid", o.k_grid, "cluster counts to search")
      ->delimiter(',');
  cmd->add_option("--d-grid", o.d_grid, "representation dimensions to search")
      ->delimiter(',');
}

dice::RunConfig resolve(const CommonOpts& o) {
  dice::RunConfig cfg = dice::load_run_config(o.config_path);
  if (o.seed_opt && o.seed_opt->count()) {
    cfg.seed = o.seed;
    cfg.hyper.seed = o.seed;
  }
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.ablate) cfg.ablate = true;
  if (!o.baselines.empty()) {
    for (const auto& b : o.baselines) {
      bool known = false;
      for (const auto& n : dice::baseline_names()) known = known || n == b;
      if (!known) throw dice::ConfigError("unknown baseline '" + b + "'");
    }
    cfg.baselines = o.baselines;
  }
  if (!o.k_grid.empty()) cfg.space.k_values = o.k_grid;
  if (!o.d_grid.empty()) cfg.space.d_values = o.d_grid;
  if (o.threads > 0) cfg.threads = o.threads;
  cfg.space.validate();
  cfg.hyper.validate();
  return cfg;
}

void print_search_result(const dice::RunOutputs& out) {
  const dice::Candidate& sel = out.search.selected();
  std::printf("selected K=%d d=%d (validation AUC %.4f)\n", sel.k, sel.d,
              sel.auc_val);
  int eligible = 0;
  for (const auto& c : out.search.candidates) eligible += c.eligible ? 1 : 0;
  std::printf("candidates: %zu tried, %d eligible\n",
              out.search.candidates.size(), eligible);
  std::printf("outputs in %s\n", out.out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep significance clustering for risk-stratified cohorts"};
  app.require_subcommand(1);

  CommonOpts synth_o, run_o, search_o, train_o, eval_o, project_o;
  std::string model_path, features_path, outcomes_path, predict_out = "out";

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_config_opts(synth, synth_o);

  CLI::App* run = app.add_subcommand(
      "run", "search architectures, evaluate the winner and baselines");
  add_config_opts(run, run_o);
  add_search_opts(run, run_o);
  run->add_option("--baselines", run_o.baselines, "baseline methods to run")
      ->delimiter(',');
  run->add_option("--threads", run_o.threads, "worker threads for the search");

  CLI::App* search = app.add_subcommand(
      "search", "search architectures and persist the winning model");
  add_config_opts(search, search_o);
  add_search_opts(search, search_o);
  search->add_option("--threads", search_o.threads,
                     "worker threads for the search");

  CLI::App* train =
      app.add_subcommand("train", "train one fixed architecture, no gate");
  add_config_opts(train, train_o);
  add_search_opts(train, train_o);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a stored model");
  eval->add_option("model", model_path, "model artifact")->required();
  add_config_opts(eval, eval_o);

  CLI::App* predict =
      app.add_subcommand("predict", "cluster and score new subjects");
  predict->add_option("model", model_path, "model artifact")->required();
  predict->add_option("features", features_path, "features CSV")->required();
  predict->add_option("--outcomes", outcomes_path,
                      "outcomes CSV supplying confounders");
  predict->add_option("--out", predict_out, "output directory");

  CLI::App* project =
      app.add_subcommand("project", "2-D latent projection of a cohort");
  project->add_option("model", model_path, "model artifact")->required();
  add_config_opts(project, project_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      dice::RunConfig cfg = resolve(synth_o);
      dice::run_synth(cfg);
      std::printf("cohort written to %s\n", cfg.out_dir.c_str());
    } else if (run->parsed()) {
      print_search_result(dice::run_pipeline(resolve(run_o), false));
    } else if (search->parsed()) {
      print_search_result(dice::run_pipeline(resolve(search_o), true));
    } else if (train->parsed()) {
      dice::RunConfig cfg = resolve(train_o);
      dice::DiceModel model = dice::run_train(cfg);
      std::printf("trained K=%d d=%d, significance gate %s\n", model.k, model.d,
                  model.eligible ? "satisfied" : "NOT satisfied");
      std::printf("outputs in %s\n", cfg.out_dir.c_str());
    } else if (eval->parsed()) {
      dice::RunConfig cfg = resolve(eval_o);
      dice::EvalReport report = dice::run_eval(cfg, model_path);
      if (report.classification.auc)
        std::printf("test AUC %.4f\n", *report.classification.auc);
      std::printf("outputs in %s\n", cfg.out_dir.c_str());
    } else if (predict->parsed()) {
      dice::run_predict(model_path, features_path, outcomes_path, predict_out);
      std::printf("predictions in %s\n", predict_out.c_str());
    } else if (project->parsed()) {
      dice::RunConfig cfg = resolve(project_o);
      dice::run_project(cfg, model_path);
      std::printf("projection in %s\n", cfg.out_dir.c_str());
    }
    return 0;
  } catch (const dice::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const dice::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const dice::NoEligibleCandidateError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  }
}
