// Model artifact: "DICEMODL" magic, a JSON header (version, shapes, hyper,
// normalization, reporting head), then raw little-endian float64 blocks for
// every parameter tensor. Round-trips bit-for-bit.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "dice/common.hpp"
#include "dice/trainer.hpp"

namespace dice {

static_assert(std::endian::native == std::endian::little,
              "artifact writer assumes a little-endian host");

namespace detail {

constexpr char kMagic[8] = {'D', 'I', 'C', 'E', 'M', 'O', 'D', 'L'};

inline nlohmann::json hyper_to_json(const DiceHyper& h) {
  return {{"lambda1", h.lambda1},
          {"lambda2", h.lambda2},
          {"lambda3", h.lambda3},
          {"lambda4", h.lambda4},
          {"n_iter", h.n_iter},
          {"n_epoch", h.n_epoch},
          {"alpha", h.alpha},
          {"alpha_g", h.alpha_g},
          {"lr", h.lr},
          {"batch_size", h.batch_size},
          {"newton_refresh_steps", h.newton_refresh_steps},
          {"seed", h.seed}};
}

// NaN has no JSON literal; empty-cluster ratios ride as null
inline nlohmann::json nanable_array(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x))
      a.push_back(x);
    else
      a.push_back(nullptr);
  }
  return a;
}

inline std::vector<double> nanable_vector(const nlohmann::json& a) {
  std::vector<double> v;
  for (const auto& e : a)
    v.push_back(e.is_null() ? std::numeric_limits<double>::quiet_NaN()
                            : e.get<double>());
  return v;
}

inline DiceHyper hyper_from_json(const nlohmann::json& j) {
  DiceHyper h;
  h.lambda1 = j.at("lambda1").get<double>();
  h.lambda2 = j.at("lambda2").get<double>();
  h.lambda3 = j.at("lambda3").get<double>();
  h.lambda4 = j.at("lambda4").get<double>();
  h.n_iter = j.at("n_iter").get<int>();
  h.n_epoch = j.at("n_epoch").get<int>();
  h.alpha = j.at("alpha").get<double>();
  h.alpha_g = j.at("alpha_g").get<double>();
  h.lr = j.at("lr").get<double>();
  h.batch_size = j.at("batch_size").get<int>();
  h.newton_refresh_steps = j.at("newton_refresh_steps").get<int>();
  h.seed = j.at("seed").get<uint64_t>();
  return h;
}

}  // namespace detail

inline void save_model(const DiceModel& model, const std::string& path,
                       const std::string& config_fingerprint = "") {
  nlohmann::json header;
  header["version"] = kToolVersion;
  header["kind"] = model.kind == CohortKind::kSequence ? "sequence" : "one_time";
  header["k"] = model.k;
  header["d"] = model.d;
  header["feature_dim"] = model.feature_dim;
  header["conf_dim"] = model.conf_dim;
  header["hidden_dim"] = model.ae.hidden_dim;
  header["hyper"] = detail::hyper_to_json(model.hyper);
  header["normalization"] = {{"day_span", model.normalization.day_span},
                             {"mean", model.normalization.mean},
                             {"stdev", model.normalization.stdev},
                             {"fitted", model.normalization.fitted}};
  header["feature_names"] = model.feature_names;
  header["confounder_names"] = model.confounder_names;
  header["outcome_head"] = {{"cluster_coef", model.outcome_cluster_coef},
                            {"conf_coef", model.outcome_conf_coef},
                            {"intercept", model.outcome_intercept},
                            {"warning", model.outcome_head_warning}};
  header["cluster_outcome_ratio"] = detail::nanable_array(model.cluster_outcome_ratio);
  header["eligible"] = model.eligible;
  header["config_fingerprint"] = config_fingerprint;

  std::vector<const Tensor2*> blocks = model.params();
  std::vector<std::string> names = model.param_names();
  blocks.push_back(&model.centroids);
  names.push_back("centroids");
  nlohmann::json shapes = nlohmann::json::array();
  for (size_t i = 0; i < blocks.size(); ++i)
    shapes.push_back({{"name", names[i]},
                      {"rows", blocks[i]->rows},
                      {"cols", blocks[i]->cols}});
  header["blocks"] = shapes;

  std::string head = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write artifact: " + path);
  out.write(detail::kMagic, 8);
  uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Tensor2* b : blocks)
    out.write(reinterpret_cast<const char*>(b->data.data()),
              static_cast<std::streamsize>(b->data.size() * sizeof(double)));
  if (!out) throw DataError("short write on artifact: " + path);
}

inline DiceModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open artifact: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kMagic, 8) != 0)
    throw DataError("corrupt artifact: bad magic in " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || len == 0 || len > (1ull << 30))
    throw DataError("corrupt artifact: bad header length in " + path);
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("corrupt artifact: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(head, nullptr, false);
  if (header.is_discarded())
    throw DataError("corrupt artifact: unparsable header in " + path);

  DiceModel m;
  try {
    if (header.at("version").get<std::string>() != kToolVersion)
      throw DataError("artifact version " +
                      header.at("version").get<std::string>() +
                      " is not supported by tool version " + kToolVersion);
    m.kind = header.at("kind").get<std::string>() == "sequence"
                 ? CohortKind::kSequence
                 : CohortKind::kOneTime;
    m.k = header.at("k").get<int>();
    m.d = header.at("d").get<int>();
    m.feature_dim = header.at("feature_dim").get<int>();
    m.conf_dim = header.at("conf_dim").get<int>();
    m.hyper = detail::hyper_from_json(header.at("hyper"));
    const auto& norm = header.at("normalization");
    m.normalization.day_span = norm.at("day_span").get<double>();
    m.normalization.mean = norm.at("mean").get<std::vector<double>>();
    m.normalization.stdev = norm.at("stdev").get<std::vector<double>>();
    m.normalization.fitted = norm.at("fitted").get<bool>();
    m.feature_names = header.at("feature_names").get<std::vector<std::string>>();
    m.confounder_names =
        header.at("confounder_names").get<std::vector<std::string>>();
    const auto& oh = header.at("outcome_head");
    m.outcome_cluster_coef = oh.at("cluster_coef").get<std::vector<double>>();
    m.outcome_conf_coef = oh.at("conf_coef").get<std::vector<double>>();
    m.outcome_intercept = oh.at("intercept").get<double>();
    m.outcome_head_warning = oh.at("warning").get<bool>();
    m.cluster_outcome_ratio =
        detail::nanable_vector(header.at("cluster_outcome_ratio"));
    m.eligible = header.at("eligible").get<bool>();
    m.ae.hidden_dim = header.at("hidden_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt artifact: header field error in " + path + ": " +
                    e.what());
  }
  m.ae.kind = m.kind;
  m.ae.input_dim = m.feature_dim;
  m.ae.latent_dim = m.d;

  std::vector<Tensor2*> blocks = m.params();
  std::vector<std::string> names = m.param_names();
  blocks.push_back(&m.centroids);
  names.push_back("centroids");
  nlohmann::json shapes;
  try {
    shapes = header.at("blocks");
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt artifact: missing block table in " + path);
  }
  if (shapes.size() != blocks.size())
    throw DataError("artifact block count mismatch in " + path);
  for (size_t i = 0; i < blocks.size(); ++i) {
    const auto& s = shapes[i];
    if (s.value("name", "") != names[i])
      throw DataError("artifact block order mismatch at '" + names[i] + "'");
    int rows = s.value("rows", -1);
    int cols = s.value("cols", -1);
    if (rows < 0 || cols < 0 || static_cast<long long>(rows) * cols > (1ll << 28))
      throw DataError("corrupt artifact: absurd block shape in " + path);
    *blocks[i] = Tensor2(rows, cols);
    in.read(reinterpret_cast<char*>(blocks[i]->data.data()),
            static_cast<std::streamsize>(blocks[i]->data.size() * sizeof(double)));
    if (!in) throw DataError("corrupt artifact: truncated block '" + names[i] +
                             "' in " + path);
  }
  in.peek();
  if (!in.eof()) throw DataError("corrupt artifact: trailing bytes in " + path);

  // fast dimension sanity before any predict call
  if (m.ae.latent_dim != m.d || m.head.w.rows != m.k || m.head.w.cols != m.d ||
      m.out_w.cols != m.k + m.conf_dim ||
      static_cast<int>(m.normalization.mean.size()) != m.feature_dim ||
      static_cast<int>(m.outcome_cluster_coef.size()) != m.k)
    throw DataError("artifact dimensions are internally inconsistent: " + path);
  return m;
}

}  // namespace dice
