// Exhaustive (K, d) grid search: every candidate trains independently with
// a seed derived from (base seed, K, d), eligibility comes from the
// training-split significance matrix, and selection maximizes validation
// AUC over eligible candidates (ties to smaller K, then smaller d).
#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "dice/evaluation.hpp"
#include "dice/trainer.hpp"

namespace dice {

struct SearchSpace {
  std::vector<int> k_values;
  std::vector<int> d_values;

  void validate() const {
    if (k_values.empty() || d_values.empty())
      throw ConfigError("search space must list at least one K and one d");
    for (int k : k_values)
      if (k < 2) throw ConfigError("search space: K must be >= 2");
    for (int d : d_values)
      if (d < 1) throw ConfigError("search space: d must be >= 1");
  }
};

struct Candidate {
  int k = 0, d = 0;
  uint64_t seed = 0;
  double auc_val = 0.0;
  bool eligible = false;
  bool would_be_eligible = false;  // significance check under ablation
  bool selected = false;
  double seconds = 0.0;
};

struct SearchResult {
  std::vector<Candidate> candidates;  // sorted by (K, d)
  int selected_index = -1;
  DiceModel selected_model;
  bool ablated = false;

  const Candidate& selected() const { return candidates[selected_index]; }
};

struct NoEligibleCandidateError : Error {
  std::vector<Candidate> candidates;
  explicit NoEligibleCandidateError(std::vector<Candidate> cs)
      : Error("no candidate met the significance constraint"),
        candidates(std::move(cs)) {}
};

struct SearchOptions {
  bool ablate = false;
  int threads = 0;  // 0 = hardware concurrency
};

inline uint64_t candidate_seed(uint64_t base, int k, int d) {
  uint64_t stream = (static_cast<uint64_t>(k) << 32) | static_cast<uint64_t>(d);
  return Rng(base).fork(stream).seed();
}

inline double validation_auc(const DiceModel& model, const Cohort& validation) {
  std::vector<double> scores;
  std::vector<int> y;
  for (const auto& s : validation.subjects) {
    scores.push_back(predict(model, s).outcome_prob);
    y.push_back(s.outcome);
  }
  int pos = 0;
  for (int v : y) pos += v;
  if (pos == 0 || pos == static_cast<int>(y.size()))
    return std::numeric_limits<double>::quiet_NaN();
  return roc_auc(scores, y);
}

// Highest validation AUC among eligible candidates; ties keep the earliest
// row, i.e. the smallest (K, d). Returns -1 when nothing is eligible.
inline int select_candidate(const std::vector<Candidate>& cands) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
    if (!cands[i].eligible) continue;
    if (!(cands[i].auc_val == cands[i].auc_val)) continue;  // NaN guard
    if (best < 0 || cands[i].auc_val > cands[best].auc_val) best = i;
  }
  return best;
}

inline SearchResult grid_search(const SplitCohort& split,
                                const SearchSpace& space,
                                const DiceHyper& hyper,
                                const SearchOptions& opts = {}) {
  space.validate();
  DiceHyper run_hyper = hyper;
  if (opts.ablate) run_hyper.lambda4 = 0.0;

  std::vector<Candidate> cands;
  for (int k : space.k_values)
    for (int d : space.d_values) {
      Candidate c;
      c.k = k;
      c.d = d;
      c.seed = candidate_seed(hyper.seed, k, d);
      cands.push_back(c);
    }

  const int n = static_cast<int>(cands.size());
  std::vector<DiceModel> models(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        auto t0 = std::chrono::steady_clock::now();
        DiceHyper h = run_hyper;
        h.seed = cands[i].seed;
        models[i] = train_dice(split, cands[i].k, cands[i].d, h);
        cands[i].auc_val = validation_auc(models[i], split.validation);
        cands[i].would_be_eligible = models[i].eligible;
        cands[i].eligible = opts.ablate ? true : models[i].eligible;
        cands[i].seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  int threads = opts.threads > 0
                    ? opts.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  int best = select_candidate(cands);
  if (best < 0) throw NoEligibleCandidateError(std::move(cands));

  cands[best].selected = true;
  SearchResult result;
  result.candidates = std::move(cands);
  result.selected_index = best;
  result.selected_model = std::move(models[best]);
  result.ablated = opts.ablate;
  return result;
}

}  // namespace dice
