// Cohort loading, validation, normalization, splitting, and synthesis.
//
// Feature CSV (sequence form):  subject_id,day,<feature_1>,...,<feature_F>
//   one row per subject-day, integer days. One-time cohorts are the same
//   with a single row per subject and day=0.
// Outcomes CSV: subject_id,outcome,<confounder_1>,...,<confounder_m>[,subgroup]
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dice/common.hpp"
#include "dice/csv.hpp"
#include "dice/rng.hpp"
#include "dice/tensor.hpp"

namespace dice {

enum class CohortKind { kSequence, kOneTime };

struct Subject {
  std::string id;
  std::vector<long> days;          // ascending; empty slot semantics for one-time
  std::vector<Tensor2> events;     // per timestamp, column vectors of length F
  int outcome = 0;
  std::vector<double> confounders;
  std::optional<std::string> subgroup;
  std::optional<int> planted_cluster;  // synthetic cohorts only; evaluation-only
  int n() const { return static_cast<int>(events.size()); }
};

struct Normalization {
  bool fitted = false;
  double day_span = 1.0;          // training-split day span, floor 1
  std::vector<double> mean;       // per feature
  std::vector<double> stdev;      // per feature, constant features get 1
};

struct Cohort {
  CohortKind kind = CohortKind::kOneTime;
  std::vector<Subject> subjects;
  std::vector<std::string> feature_names;    // includes trailing "norm_day" for sequences
  std::vector<std::string> confounder_names;
  Normalization normalization;

  int size() const { return static_cast<int>(subjects.size()); }
  int feature_dim() const { return static_cast<int>(feature_names.size()); }
  int confounder_dim() const { return static_cast<int>(confounder_names.size()); }

  bool has_planted() const {
    return !subjects.empty() && subjects.front().planted_cluster.has_value();
  }
  bool has_subgroups() const {
    for (const auto& s : subjects)
      if (s.subgroup) return true;
    return false;
  }
};

struct SplitCohort {
  Cohort train, validation, test;
  uint64_t seed = 0;
};

// ---- loading ---------------------------------------------------------------

namespace detail {

struct RawSubject {
  std::vector<long> days;
  std::vector<std::vector<double>> rows;
  std::vector<size_t> order;  // insertion order -> sort by day
};

inline void append_day_feature(Cohort& c) {
  // raw relative day goes in the trailing slot; split/predict rescale it
  for (auto& s : c.subjects) {
    long first = s.days.front();
    for (int t = 0; t < s.n(); ++t) {
      s.events[t].data.push_back(static_cast<double>(s.days[t] - first));
      s.events[t].rows += 1;
    }
  }
  c.feature_names.push_back("norm_day");
}

}  // namespace detail

// Loads subjects from the features CSV alone (no outcomes required);
// used by prediction on unlabeled data.
inline Cohort load_features(const std::string& features_path) {
  CsvTable ft = read_csv(features_path);
  if (ft.header.size() < 3 || ft.header[0] != "subject_id" || ft.header[1] != "day")
    throw DataError(features_path +
                    ":1: header must be subject_id,day,<feature...>");
  for (size_t i = 0; i < ft.header.size(); ++i)
    for (size_t j = i + 1; j < ft.header.size(); ++j)
      if (ft.header[i] == ft.header[j])
        throw DataError(features_path + ":1: duplicate column '" + ft.header[i] + "'");
  if (ft.rows.empty()) throw DataError(features_path + ": no subjects");

  const int F = static_cast<int>(ft.header.size()) - 2;
  std::map<std::string, detail::RawSubject> raw;
  std::vector<std::string> id_order;
  for (size_t r = 0; r < ft.rows.size(); ++r) {
    const auto& row = ft.rows[r];
    std::string where = features_path + ":" + std::to_string(r + 2);
    if (row[0].empty()) throw DataError(where + ": missing subject id");
    long day = parse_long(row[1], where + " (day)");
    std::vector<double> feats(F);
    for (int j = 0; j < F; ++j) {
      if (row[j + 2].empty())
        throw DataError(where + ": missing value in column '" + ft.header[j + 2] + "'");
      feats[j] = parse_double(row[j + 2], where + " (" + ft.header[j + 2] + ")");
      if (!std::isfinite(feats[j]))
        throw DataError(where + ": non-finite value in column '" + ft.header[j + 2] + "'");
    }
    auto it = raw.find(row[0]);
    if (it == raw.end()) {
      id_order.push_back(row[0]);
      it = raw.emplace(row[0], detail::RawSubject{}).first;
    }
    for (long d : it->second.days)
      if (d == day)
        throw DataError(where + ": duplicate day " + std::to_string(day) +
                        " for subject '" + row[0] + "'");
    it->second.days.push_back(day);
    it->second.rows.push_back(std::move(feats));
  }

  Cohort c;
  c.feature_names.assign(ft.header.begin() + 2, ft.header.end());
  bool one_time = true;
  for (const std::string& id : id_order) {
    auto& rs = raw[id];
    std::vector<size_t> order(rs.days.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return rs.days[a] < rs.days[b]; });
    Subject s;
    s.id = id;
    for (size_t i : order) {
      s.days.push_back(rs.days[i]);
      Tensor2 ev(F, 1);
      ev.data = rs.rows[i];
      s.events.push_back(std::move(ev));
    }
    if (s.n() > 1 || s.days.front() != 0) one_time = false;
    c.subjects.push_back(std::move(s));
  }
  c.kind = one_time ? CohortKind::kOneTime : CohortKind::kSequence;
  if (c.kind == CohortKind::kSequence) detail::append_day_feature(c);
  return c;
}

// Joins outcome rows (outcome, confounders, optional subgroup) onto an
// already-loaded feature cohort.
inline void join_outcomes(Cohort& c, const std::string& outcomes_path) {
  CsvTable ot = read_csv(outcomes_path);
  if (ot.header.size() < 2 || ot.header[0] != "subject_id" || ot.header[1] != "outcome")
    throw DataError(outcomes_path +
                    ":1: header must be subject_id,outcome,<confounder...>[,subgroup]");
  bool has_subgroup = !ot.header.empty() && ot.header.back() == "subgroup";
  for (size_t i = 2; i + (has_subgroup ? 1 : 0) < ot.header.size(); ++i)
    if (ot.header[i] == "subgroup")
      throw DataError(outcomes_path + ":1: 'subgroup' must be the last column");
  for (size_t i = 0; i < ot.header.size(); ++i)
    for (size_t j = i + 1; j < ot.header.size(); ++j)
      if (ot.header[i] == ot.header[j])
        throw DataError(outcomes_path + ":1: duplicate column '" + ot.header[i] + "'");
  const int m = static_cast<int>(ot.header.size()) - 2 - (has_subgroup ? 1 : 0);

  struct OutRow {
    int outcome;
    std::vector<double> conf;
    std::optional<std::string> subgroup;
  };
  std::map<std::string, OutRow> rows;
  for (size_t r = 0; r < ot.rows.size(); ++r) {
    const auto& row = ot.rows[r];
    std::string where = outcomes_path + ":" + std::to_string(r + 2);
    if (row[0].empty()) throw DataError(where + ": missing subject id");
    if (rows.count(row[0]))
      throw DataError(where + ": duplicate subject '" + row[0] + "'");
    OutRow o;
    if (row[1] == "0")
      o.outcome = 0;
    else if (row[1] == "1")
      o.outcome = 1;
    else
      throw DataError(where + ": outcome must be 0 or 1, got '" + row[1] + "'");
    for (int j = 0; j < m; ++j)
      o.conf.push_back(parse_double(row[j + 2], where + " (" + ot.header[j + 2] + ")"));
    if (has_subgroup) o.subgroup = row.back();
    rows.emplace(row[0], std::move(o));
  }

  c.confounder_names.assign(ot.header.begin() + 2,
                            ot.header.end() - (has_subgroup ? 1 : 0));
  for (auto& s : c.subjects) {
    auto it = rows.find(s.id);
    if (it == rows.end())
      throw DataError(outcomes_path + ": no outcome row for subject '" + s.id + "'");
    s.outcome = it->second.outcome;
    s.confounders = it->second.conf;
    s.subgroup = it->second.subgroup;
    rows.erase(it);
  }
  if (!rows.empty())
    throw DataError(outcomes_path + ": subject '" + rows.begin()->first +
                    "' has no feature rows");
}

inline Cohort load_cohort(const std::string& features_path,
                          const std::string& outcomes_path) {
  Cohort c = load_features(features_path);
  join_outcomes(c, outcomes_path);
  return c;
}

// ---- normalization ----------------------------------------------------------

// Rescales the trailing day slot by the stored span and z-scores every
// feature with the stored statistics.
inline void apply_normalization(Cohort& c, const Normalization& norm) {
  const int F = c.feature_dim();
  if (static_cast<int>(norm.mean.size()) != F)
    throw DataError("normalization statistics cover " +
                    std::to_string(norm.mean.size()) + " features, data has " +
                    std::to_string(F));
  for (auto& s : c.subjects)
    for (auto& ev : s.events) {
      if (c.kind == CohortKind::kSequence)
        ev.data[F - 1] /= norm.day_span;
      for (int j = 0; j < F; ++j)
        ev.data[j] = (ev.data[j] - norm.mean[j]) / norm.stdev[j];
    }
  c.normalization = norm;
}

inline Normalization fit_normalization(const Cohort& train) {
  const int F = train.feature_dim();
  Normalization norm;
  norm.day_span = 1.0;
  if (train.kind == CohortKind::kSequence) {
    long span = 1;
    for (const auto& s : train.subjects)
      span = std::max(span, s.days.back() - s.days.front());
    norm.day_span = static_cast<double>(span);
  }
  norm.mean.assign(F, 0.0);
  norm.stdev.assign(F, 1.0);
  long n = 0;
  std::vector<double> sum(F, 0.0), sumsq(F, 0.0);
  for (const auto& s : train.subjects)
    for (const auto& ev : s.events) {
      ++n;
      for (int j = 0; j < F; ++j) {
        double x = ev.data[j];
        if (train.kind == CohortKind::kSequence && j == F - 1) x /= norm.day_span;
        sum[j] += x;
        sumsq[j] += x * x;
      }
    }
  for (int j = 0; j < F; ++j) {
    norm.mean[j] = sum[j] / n;
    double var = sumsq[j] / n - norm.mean[j] * norm.mean[j];
    norm.stdev[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  norm.fitted = true;
  return norm;
}

// ---- splitting ---------------------------------------------------------------

// Largest-remainder partition of n into parts proportional to ratios.
inline std::vector<int> partition_sizes(int n, const std::vector<int>& ratios) {
  int total = 0;
  for (int r : ratios) total += r;
  std::vector<int> sizes(ratios.size());
  std::vector<double> rem(ratios.size());
  int assigned = 0;
  for (size_t i = 0; i < ratios.size(); ++i) {
    double quota = static_cast<double>(n) * ratios[i] / total;
    sizes[i] = static_cast<int>(quota);
    rem[i] = quota - sizes[i];
    assigned += sizes[i];
  }
  std::vector<size_t> order(ratios.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return rem[a] > rem[b]; });
  for (int k = 0; k < n - assigned; ++k) sizes[order[k % order.size()]] += 1;
  return sizes;
}

// Splits by seeded shuffle + largest-remainder rounding. Normalization is
// fitted on the training split unless a previously fitted one is supplied
// (evaluating a stored model against new data).
inline SplitCohort split_cohort(const Cohort& cohort,
                                const std::vector<int>& ratios, uint64_t seed,
                                const Normalization* fitted = nullptr) {
  if (cohort.size() < 6)
    throw DataError("split_cohort: need at least 6 subjects, have " +
                    std::to_string(cohort.size()));
  if (ratios.size() != 3) throw ConfigError("split_cohort: expected 3 ratios");
  std::vector<int> idx(cohort.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(idx);
  auto sizes = partition_sizes(cohort.size(), ratios);

  SplitCohort out;
  out.seed = seed;
  Cohort* parts[3] = {&out.train, &out.validation, &out.test};
  int pos = 0;
  for (int p = 0; p < 3; ++p) {
    parts[p]->kind = cohort.kind;
    parts[p]->feature_names = cohort.feature_names;
    parts[p]->confounder_names = cohort.confounder_names;
    for (int k = 0; k < sizes[p]; ++k)
      parts[p]->subjects.push_back(cohort.subjects[idx[pos++]]);
  }
  Normalization norm = fitted ? *fitted : fit_normalization(out.train);
  for (Cohort* p : parts) apply_normalization(*p, norm);
  return out;
}

// ---- synthesis ---------------------------------------------------------------

struct GeneratorSpec {
  int k_true = 3;
  int per_cluster = 200;
  int feature_dim = 6;
  int seq_len_min = 2;
  int seq_len_max = 4;
  double separation = 4.0;
  std::vector<double> outcome_probs;
  int confounder_dim = 2;
};

// Subjects are drawn from planted latent clusters: orthonormal center
// directions scaled by `separation`, unit latent noise, then a fixed
// random linear map to the observed features plus small observation noise.
inline Cohort synth_cohort(const GeneratorSpec& spec, uint64_t seed) {
  if (spec.k_true < 1) throw ConfigError("synth: k_true must be >= 1");
  if (spec.per_cluster < 1) throw ConfigError("synth: per_cluster must be >= 1");
  if (spec.feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
  if (spec.seq_len_min < 1 || spec.seq_len_max < spec.seq_len_min)
    throw ConfigError("synth: need 1 <= seq_len_min <= seq_len_max");
  if (static_cast<int>(spec.outcome_probs.size()) != spec.k_true)
    throw ConfigError("synth: outcome_probs must have k_true entries");
  for (double p : spec.outcome_probs)
    if (!(p > 0.0 && p < 1.0))
      throw ConfigError("synth: outcome probabilities must lie strictly in (0,1)");
  if (spec.confounder_dim < 0)
    throw ConfigError("synth: confounder_dim must be >= 0");

  Rng rng(seed);
  const int L = std::max(2, spec.k_true);  // latent dimension
  const int F = spec.feature_dim;

  // orthonormal center directions (Gram-Schmidt on gaussian draws), scaled
  // by the separation only after the whole basis is built
  std::vector<std::vector<double>> centers(spec.k_true, std::vector<double>(L));
  for (int k = 0; k < spec.k_true; ++k) {
    auto& c = centers[k];
    double nrm = 0.0;
    do {
      for (int i = 0; i < L; ++i) c[i] = rng.next_normal();
      for (int j = 0; j < k; ++j) {
        double d = 0.0;
        for (int i = 0; i < L; ++i) d += c[i] * centers[j][i];
        for (int i = 0; i < L; ++i) c[i] -= d * centers[j][i];
      }
      nrm = 0.0;
      for (int i = 0; i < L; ++i) nrm += c[i] * c[i];
      nrm = std::sqrt(nrm);
    } while (nrm < 1e-6);
    for (int i = 0; i < L; ++i) c[i] /= nrm;
  }
  for (auto& c : centers)
    for (double& v : c) v *= spec.separation;

  // fixed random observation map
  Tensor2 obs_map(F, L);
  for (double& v : obs_map.data) v = rng.next_normal() / std::sqrt(static_cast<double>(L));

  Cohort c;
  c.kind = spec.seq_len_max > 1 ? CohortKind::kSequence : CohortKind::kOneTime;
  for (int j = 0; j < F; ++j) c.feature_names.push_back("f" + std::to_string(j + 1));
  for (int j = 0; j < spec.confounder_dim; ++j)
    c.confounder_names.push_back(j % 2 == 0 ? "age" + std::to_string(j / 2 + 1)
                                            : "sex" + std::to_string(j / 2 + 1));

  int counter = 0;
  for (int k = 0; k < spec.k_true; ++k) {
    for (int i = 0; i < spec.per_cluster; ++i) {
      Subject s;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "s%05d", counter++);
      s.id = buf;
      s.planted_cluster = k;
      int np = rng.next_int(spec.seq_len_min, spec.seq_len_max);
      Tensor2 u(L, 1);
      for (int j = 0; j < L; ++j) u.data[j] = centers[k][j] + rng.next_normal();
      Tensor2 base = matmul(obs_map, u);
      for (int t = 0; t < np; ++t) {
        s.days.push_back(t);
        Tensor2 ev(F, 1);
        for (int j = 0; j < F; ++j) ev.data[j] = base.data[j] + 0.1 * rng.next_normal();
        s.events.push_back(std::move(ev));
      }
      s.outcome = rng.next_double() < spec.outcome_probs[k] ? 1 : 0;
      for (int j = 0; j < spec.confounder_dim; ++j)
        s.confounders.push_back(j % 2 == 0 ? rng.next_normal()
                                           : static_cast<double>(rng.next_below(2)));
      s.subgroup = rng.next_below(2) == 0 ? "g0" : "g1";
      c.subjects.push_back(std::move(s));
    }
  }
  if (c.kind == CohortKind::kSequence) detail::append_day_feature(c);
  return c;
}

// ---- CSV export --------------------------------------------------------------

// Writes the raw (unnormalized) cohort in the loadable CSV formats.
// Sequence cohorts drop the derived norm_day slot; it is rebuilt on load.
inline void write_cohort_csvs(const Cohort& c, const std::string& features_path,
                              const std::string& outcomes_path) {
  const bool seq = c.kind == CohortKind::kSequence;
  const int F = c.feature_dim() - (seq ? 1 : 0);
  std::string f = "subject_id,day";
  for (int j = 0; j < F; ++j) f += "," + c.feature_names[j];
  f += "\n";
  for (const auto& s : c.subjects)
    for (int t = 0; t < s.n(); ++t) {
      f += s.id + "," + std::to_string(s.days[t]);
      for (int j = 0; j < F; ++j) f += "," + fmt_double(s.events[t].data[j]);
      f += "\n";
    }
  write_text_file(features_path, f);

  bool subgroups = c.has_subgroups();
  std::string o = "subject_id,outcome";
  for (const auto& name : c.confounder_names) o += "," + name;
  if (subgroups) o += ",subgroup";
  o += "\n";
  for (const auto& s : c.subjects) {
    o += s.id + "," + std::to_string(s.outcome);
    for (double v : s.confounders) o += "," + fmt_double(v);
    if (subgroups) o += "," + (s.subgroup ? *s.subgroup : std::string());
    o += "\n";
  }
  write_text_file(outcomes_path, o);
}

inline void write_planted_csv(const Cohort& c, const std::string& path) {
  std::string out = "subject_id,planted_cluster\n";
  for (const auto& s : c.subjects)
    if (s.planted_cluster)
      out += s.id + "," + std::to_string(*s.planted_cluster) + "\n";
  write_text_file(path, out);
}

}  // namespace dice
