// Output writers: candidate/trace/projection/prediction CSVs, evaluation
// JSON, side-by-side method tables, self-contained SVG plots, and the run
// manifest with content hashes. Everything is emitted deterministically so
// equal runs produce byte-identical files.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dice/csv.hpp"
#include "dice/evaluation.hpp"
#include "dice/search.hpp"
#include "dice/trainer.hpp"

namespace dice {

inline uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

// ---- CSV writers ---------------------------------------------------------------

inline std::string render_candidates_csv(const std::vector<Candidate>& cands,
                                         bool ablated, bool wall_times) {
  std::string out = "K,d,auc_val,eligible,selected,seconds";
  if (ablated) out += ",would_be_eligible";
  out += "\n";
  for (const auto& c : cands) {
    out += std::to_string(c.k) + "," + std::to_string(c.d) + "," +
           fmt_double(c.auc_val) + "," + (c.eligible ? "yes" : "no") + "," +
           (c.selected ? "yes" : "no") + "," +
           (wall_times ? fmt_fixed(c.seconds, 3) : std::string("0.000"));
    if (ablated) out += std::string(",") + (c.would_be_eligible ? "yes" : "no");
    out += "\n";
  }
  return out;
}

inline void write_candidates_csv(const std::string& path,
                                 const std::vector<Candidate>& cands,
                                 bool ablated, bool wall_times) {
  write_text_file(path, render_candidates_csv(cands, ablated, wall_times));
}

inline void write_trace_csv(const std::string& path,
                            const std::vector<TraceRow>& trace) {
  std::string out = "epoch,outer_iter,L_AE,L_clustering,L1,L2,penalty,total,eligible\n";
  for (const auto& r : trace)
    out += std::to_string(r.epoch) + "," + std::to_string(r.outer_iter) + "," +
           fmt_double(r.l_ae) + "," + fmt_double(r.l_clustering) + "," +
           fmt_double(r.l1) + "," + fmt_double(r.l2) + "," +
           fmt_double(r.penalty) + "," + fmt_double(r.total) + "," +
           (r.eligible ? "1" : "0") + "\n";
  write_text_file(path, out);
}

inline void write_projection_csv(const std::string& path,
                                 const std::vector<std::string>& ids,
                                 const PcaProjection& proj,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& outcomes) {
  std::string out = "subject_id,x,y,cluster,outcome\n";
  for (size_t i = 0; i < ids.size(); ++i)
    out += ids[i] + "," + fmt_double(proj.coords.at(static_cast<int>(i), 0)) +
           "," + fmt_double(proj.coords.at(static_cast<int>(i), 1)) + "," +
           std::to_string(labels[i] + 1) + "," + std::to_string(outcomes[i]) +
           "\n";
  write_text_file(path, out);
}

// clusters reported 1-based; risk rank 1 = highest training outcome ratio
inline std::vector<int> risk_ranks(const std::vector<double>& ratios) {
  const int k = static_cast<int>(ratios.size());
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double ra = std::isnan(ratios[a]) ? -1.0 : ratios[a];
    double rb = std::isnan(ratios[b]) ? -1.0 : ratios[b];
    return ra > rb;
  });
  std::vector<int> rank(k);
  for (int pos = 0; pos < k; ++pos) rank[order[pos]] = pos + 1;
  return rank;
}

inline void write_predictions_csv(const std::string& path,
                                  const std::vector<std::string>& ids,
                                  const std::vector<Prediction>& preds,
                                  const std::vector<double>& train_ratios) {
  std::vector<int> ranks = risk_ranks(train_ratios);
  std::string out = "subject_id,cluster,risk_rank,outcome_prob\n";
  for (size_t i = 0; i < ids.size(); ++i)
    out += ids[i] + "," + std::to_string(preds[i].hard + 1) + "," +
           std::to_string(ranks[preds[i].hard]) + "," +
           fmt_double(preds[i].outcome_prob) + "\n";
  write_text_file(path, out);
}

// ---- evaluation JSON -----------------------------------------------------------

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline nlohmann::json matrix_json(const Tensor2& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols; ++j) {
      double v = m.at(i, j);
      if (std::isfinite(v))
        row.push_back(v);
      else
        row.push_back(nullptr);
    }
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json significance_json(const SignificanceMatrix& s) {
  return {{"p", matrix_json(s.p)},
          {"g", matrix_json(s.g)},
          {"defined", s.defined},
          {"eligible", s.eligible}};
}

}  // namespace detail

inline nlohmann::json eval_report_json(const EvalReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["split"] = r.split;
  j["k"] = r.k;
  j["d"] = r.d;
  j["n"] = r.n;
  j["eligible"] = r.eligible;
  if (r.indices)
    j["clustering"] = {{"silhouette", r.indices->silhouette},
                       {"calinski_harabasz", r.indices->calinski_harabasz},
                       {"davies_bouldin", r.indices->davies_bouldin}};
  else
    j["clustering"] = nullptr;
  const ClassificationReport& c = r.classification;
  j["classification"] = {
      {"threshold", c.threshold}, {"tp", c.tp},
      {"fp", c.fp},               {"tn", c.tn},
      {"fn", c.fn},               {"auc", detail::opt_json(c.auc)},
      {"acc", c.acc},             {"tpr", detail::opt_json(c.tpr)},
      {"fpr", detail::opt_json(c.fpr)},
      {"tnr", detail::opt_json(c.tnr)},
      {"fnr", detail::opt_json(c.fnr)},
      {"ppv", detail::opt_json(c.ppv)},
      {"npv", detail::opt_json(c.npv)}};
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.subgroups)
    groups.push_back({{"group", g.group},
                      {"n", g.n},
                      {"auc", detail::opt_json(g.auc)},
                      {"skipped", g.skipped}});
  j["subgroups"] = groups;
  nlohmann::json ratios = nlohmann::json::array();
  for (double v : r.ratios.ratio) {
    if (std::isfinite(v))
      ratios.push_back(v);
    else
      ratios.push_back(nullptr);
  }
  j["outcome_ratios"] = {{"ratio", ratios},
                         {"size", r.ratios.size},
                         {"spread", r.ratios.spread}};
  j["ari"] = detail::opt_json(r.ari);
  j["auc_representation"] = detail::opt_json(r.auc_representation);
  if (r.significance)
    j["significance"] = detail::significance_json(*r.significance);
  else
    j["significance"] = nullptr;
  return j;
}

inline void write_eval_json(const std::string& path, const EvalReport& r) {
  write_text_file(path, eval_report_json(r).dump(2) + "\n");
}

// Side-by-side method tables: clustering quality and outcome classification.
inline void write_method_tables(const std::string& clustering_path,
                                const std::string& classification_path,
                                const std::vector<EvalReport>& reports) {
  std::string a = "method,silhouette,calinski_harabasz,davies_bouldin,outcome_ratio_spread,ari\n";
  std::string b = "method,auc,acc,fpr,tpr,fnr,tnr,ppv,npv\n";
  auto cell = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? fmt_double(*v) : std::string();
  };
  for (const auto& r : reports) {
    a += r.method + ",";
    if (r.indices)
      a += fmt_double(r.indices->silhouette) + "," +
           fmt_double(r.indices->calinski_harabasz) + "," +
           fmt_double(r.indices->davies_bouldin);
    else
      a += ",,";
    a += "," + fmt_double(r.ratios.spread) + "," + cell(r.ari) + "\n";
    const auto& c = r.classification;
    b += r.method + "," + cell(c.auc) + "," + fmt_double(c.acc) + "," +
         cell(c.fpr) + "," + cell(c.tpr) + "," + cell(c.fnr) + "," +
         cell(c.tnr) + "," + cell(c.ppv) + "," + cell(c.npv) + "\n";
  }
  write_text_file(clustering_path, a);
  write_text_file(classification_path, b);
}

// ---- SVG -----------------------------------------------------------------------

namespace detail {

inline const char* cluster_color(int k) {
  static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                  "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
                                  "#ccb974", "#64b5cd"};
  return palette[k % 10];
}

}  // namespace detail

// Scatter of the 2-D projection colored by cluster, with a per-cluster
// outcome-ratio bar chart beside it.
inline std::string render_projection_svg(const PcaProjection& proj,
                                         const std::vector<int>& labels,
                                         const OutcomeRatios& ratios) {
  const int n = proj.coords.rows;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int i = 0; i < n; ++i) {
    xmin = std::min(xmin, proj.coords.at(i, 0));
    xmax = std::max(xmax, proj.coords.at(i, 0));
    ymin = std::min(ymin, proj.coords.at(i, 1));
    ymax = std::max(ymax, proj.coords.at(i, 1));
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto sx = [&](double x) { return 40.0 + 380.0 * (x - xmin) / (xmax - xmin); };
  auto sy = [&](double y) { return 420.0 - 380.0 * (y - ymin) / (ymax - ymin); };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"460\" "
      "viewBox=\"0 0 900 460\">\n"
      "<rect width=\"900\" height=\"460\" fill=\"white\"/>\n"
      "<text x=\"230\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"14\">latent space (2-D projection)</text>\n"
      "<text x=\"680\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"14\">outcome ratio by cluster</text>\n";
  for (int i = 0; i < n; ++i)
    svg += "<circle cx=\"" + fmt_fixed(sx(proj.coords.at(i, 0)), 2) +
           "\" cy=\"" + fmt_fixed(sy(proj.coords.at(i, 1)), 2) +
           "\" r=\"3\" fill=\"" + detail::cluster_color(labels[i]) +
           "\" fill-opacity=\"0.75\"/>\n";

  const int k = static_cast<int>(ratios.ratio.size());
  double bar_w = k > 0 ? 360.0 / k : 0.0;
  for (int kk = 0; kk < k; ++kk) {
    double r = std::isnan(ratios.ratio[kk]) ? 0.0 : ratios.ratio[kk];
    double h = 360.0 * r;
    double x0 = 500.0 + bar_w * kk;
    svg += "<rect x=\"" + fmt_fixed(x0 + 6.0, 2) + "\" y=\"" +
           fmt_fixed(420.0 - h, 2) + "\" width=\"" +
           fmt_fixed(std::max(bar_w - 12.0, 2.0), 2) + "\" height=\"" +
           fmt_fixed(h, 2) + "\" fill=\"" + detail::cluster_color(kk) +
           "\"/>\n";
    svg += "<text x=\"" + fmt_fixed(x0 + bar_w / 2.0, 2) +
           "\" y=\"438\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">" +
           std::to_string(kk + 1) + "</text>\n";
    svg += "<text x=\"" + fmt_fixed(x0 + bar_w / 2.0, 2) + "\" y=\"" +
           fmt_fixed(414.0 - h, 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           fmt_fixed(r, 2) + "</text>\n";
  }
  svg += "<line x1=\"500\" y1=\"420\" x2=\"860\" y2=\"420\" stroke=\"#333\"/>\n";
  svg += "</svg>\n";
  return svg;
}

// ---- manifest --------------------------------------------------------------------

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read back output file: " + path);
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

inline void write_manifest(const std::string& dir,
                           const nlohmann::json& resolved_config,
                           uint64_t seed,
                           const std::vector<std::string>& output_files) {
  nlohmann::json m;
  m["tool_version"] = kToolVersion;
  m["seed"] = seed;
  m["config"] = resolved_config;
  std::map<std::string, std::string> hashes;
  for (const auto& f : output_files)
    hashes[f] = fnv1a64_hex(read_file_bytes(dir + "/" + f));
  m["outputs"] = hashes;
  write_text_file(dir + "/manifest.json", m.dump(2) + "\n");
}

}  // namespace dice
