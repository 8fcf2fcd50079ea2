#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dice/csv.hpp"

#ifndef DICE_CLI_PATH
#error "DICE_CLI_PATH must point at the built executable"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int c = 0;
    path = fs::temp_directory_path() /
           ("dice_cli_" + std::to_string(::getpid()) + "_" + std::to_string(c++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(DICE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::string tiny_config(const TempDir& tmp, const std::string& out_dir,
                        double separation = 4.0, const std::string& extra = "") {
  static int counter = 0;
  std::string body =
      "{\n"
      "  \"generator\": {\"k_true\": 2, \"per_cluster\": 24, \"feature_dim\": 3,\n"
      "                \"seq_len_min\": 2, \"seq_len_max\": 3,\n"
      "                \"separation\": " + dice::fmt_double(separation) + ",\n"
      "                \"outcome_probs\": [0.85, 0.15], \"confounder_dim\": 1},\n"
      "  \"search\": {\"k\": [2], \"d\": [2]},\n"
      "  \"hyper\": {\"n_iter\": 20, \"n_epoch\": 2, \"lr\": 0.01, \"batch_size\": 8},\n"
      "  \"baselines\": [\"pca_kmeans\"],\n"
      "  \"output\": {\"dir\": \"" + out_dir + "\"},\n"
      "  \"seed\": 21" + extra + "\n"
      "}\n";
  std::string path = tmp.file("config" + std::to_string(counter++) + ".json");
  dice::write_text_file(path, body);
  return path;
}

}  // namespace

TEST_CASE("help succeeds and bare invocation asks for a subcommand") {
  REQUIRE(run_cli("--help") == 0);
  REQUIRE(run_cli("synth --help") == 0);
  REQUIRE(run_cli("") == 2);
  REQUIRE(run_cli("frobnicate") == 2);
}

TEST_CASE("config errors exit with status 2") {
  TempDir tmp;
  REQUIRE(run_cli("run --config " + tmp.file("absent.json")) == 2);
  dice::write_text_file(tmp.file("broken.json"), "{\"seed\": }");
  REQUIRE(run_cli("run --config " + tmp.file("broken.json")) == 2);
  dice::write_text_file(tmp.file("unknown.json"),
                        "{\"generator\": {}, \"sneed\": 1}");
  REQUIRE(run_cli("run --config " + tmp.file("unknown.json")) == 2);
  dice::write_text_file(tmp.file("both.json"),
                        "{\"generator\": {}, \"data\": {\"features\": \"x\"}}");
  REQUIRE(run_cli("run --config " + tmp.file("both.json")) == 2);
}

TEST_CASE("malformed data files exit with status 3") {
  TempDir tmp;
  dice::write_text_file(tmp.file("feat.csv"),
                        "subject_id,day,f\na,0,1.0\na,0,2.0\n");
  dice::write_text_file(tmp.file("out.csv"), "subject_id,outcome\na,1\n");
  dice::write_text_file(
      tmp.file("cfg.json"),
      "{\"data\": {\"features\": \"" + tmp.file("feat.csv") +
          "\", \"outcomes\": \"" + tmp.file("out.csv") +
          "\"}, \"output\": {\"dir\": \"" + tmp.file("out") + "\"}}");
  REQUIRE(run_cli("run --config " + tmp.file("cfg.json")) == 3);
}

TEST_CASE("synth writes the cohort and its manifest") {
  TempDir tmp;
  std::string cfg = tiny_config(tmp, tmp.file("synth_out"));
  REQUIRE(run_cli("synth --config " + cfg) == 0);
  REQUIRE(fs::exists(tmp.file("synth_out/features.csv")));
  REQUIRE(fs::exists(tmp.file("synth_out/outcomes.csv")));
  REQUIRE(fs::exists(tmp.file("synth_out/planted.csv")));
  REQUIRE(fs::exists(tmp.file("synth_out/manifest.json")));
  std::string features = slurp(tmp.file("synth_out/features.csv"));
  REQUIRE(features.rfind("subject_id,day,", 0) == 0);
}

TEST_CASE("run produces the full report bundle") {
  TempDir tmp;
  std::string cfg = tiny_config(tmp, tmp.file("run_out"));
  REQUIRE(run_cli("run --config " + cfg) == 0);
  for (const char* name :
       {"candidates.csv", "trace.csv", "model.bin", "eval_dice.json",
        "eval_dice_val.json", "eval_pca_kmeans.json", "table_clustering.csv",
        "table_classification.csv", "projection.csv", "projection.svg",
        "manifest.json"}) {
    INFO(name);
    REQUIRE(fs::exists(tmp.file(std::string("run_out/") + name)));
  }
  std::string cands = slurp(tmp.file("run_out/candidates.csv"));
  REQUIRE(cands.rfind("K,d,auc_val,eligible,selected,seconds", 0) == 0);
  REQUIRE(cands.find("yes") != std::string::npos);
}

TEST_CASE("train and predict cooperate through the artifact") {
  TempDir tmp;
  std::string cfg = tiny_config(tmp, tmp.file("train_out"));
  REQUIRE(run_cli("train --config " + cfg) == 0);
  REQUIRE(fs::exists(tmp.file("train_out/model.bin")));
  REQUIRE(fs::exists(tmp.file("train_out/trace.csv")));

  std::string synth_cfg = tiny_config(tmp, tmp.file("cohort"));
  REQUIRE(run_cli("synth --config " + synth_cfg) == 0);
  REQUIRE(run_cli("predict " + tmp.file("train_out/model.bin") + " " +
                  tmp.file("cohort/features.csv") + " --outcomes " +
                  tmp.file("cohort/outcomes.csv") + " --out " +
                  tmp.file("pred_out")) == 0);
  std::string preds = slurp(tmp.file("pred_out/predictions.csv"));
  REQUIRE(preds.rfind("subject_id,cluster,risk_rank,outcome_prob", 0) == 0);
  size_t rows = std::count(preds.begin(), preds.end(), '\n');
  REQUIRE(rows == 49);  // header + 48 subjects

  REQUIRE(run_cli("eval " + tmp.file("train_out/model.bin") + " --config " +
                  cfg + " --out " + tmp.file("eval_out")) == 0);
  REQUIRE(fs::exists(tmp.file("eval_out/eval_dice.json")));
  REQUIRE(run_cli("project " + tmp.file("train_out/model.bin") + " --config " +
                  cfg + " --out " + tmp.file("proj_out")) == 0);
  REQUIRE(fs::exists(tmp.file("proj_out/projection.svg")));
}

TEST_CASE("train refuses a grid and search maps infeasibility to status 4") {
  TempDir tmp;
  std::string grid_cfg =
      tiny_config(tmp, tmp.file("g_out"), 4.0, ",\n  \"threads\": 1");
  std::string grid = slurp(grid_cfg);
  size_t at = grid.find("\"k\": [2]");
  REQUIRE(at != std::string::npos);
  grid.replace(at, 8, "\"k\": [2, 3]");
  dice::write_text_file(tmp.file("grid.json"), grid);
  REQUIRE(run_cli("train --config " + tmp.file("grid.json")) == 2);

  std::string hard_cfg = tiny_config(tmp, tmp.file("hard_out"), 4.0,
                                     ",\n  \"threads\": 1");
  std::string hard = slurp(hard_cfg);
  at = hard.find("\"lr\": 0.01");
  REQUIRE(at != std::string::npos);
  hard.replace(at, 10, "\"lr\": 0.01, \"alpha_g\": 1e9");
  dice::write_text_file(tmp.file("hard.json"), hard);
  REQUIRE(run_cli("search --config " + tmp.file("hard.json")) == 4);
  REQUIRE(fs::exists(tmp.file("hard_out/candidates.csv")));
  REQUIRE(fs::exists(tmp.file("hard_out/manifest.json")));
  std::string cands = slurp(tmp.file("hard_out/candidates.csv"));
  REQUIRE(cands.find("no,no") != std::string::npos);
}

TEST_CASE("seed overrides on the command line change the outputs") {
  TempDir tmp;
  std::string cfg = tiny_config(tmp, tmp.file("a"));
  REQUIRE(run_cli("search --config " + cfg + " --out " + tmp.file("s1") +
                  " --seed 42") == 0);
  REQUIRE(run_cli("search --config " + cfg + " --out " + tmp.file("s2") +
                  " --seed 42") == 0);
  REQUIRE(run_cli("search --config " + cfg + " --out " + tmp.file("s3") +
                  " --seed 303") == 0);
  REQUIRE(slurp(tmp.file("s1/trace.csv")) == slurp(tmp.file("s2/trace.csv")));
  REQUIRE(slurp(tmp.file("s1/trace.csv")) != slurp(tmp.file("s3/trace.csv")));
}
