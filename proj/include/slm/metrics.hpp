#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slm/error.hpp"
#include "slm/scoring_search.hpp"

namespace slm::metrics {

using search::Permutation;

struct StoryScore {
  std::string story_id;
  double tau = 1.0;
  bool exact_match = true;
  double pairwise_ratio = 1.0;
};

struct EvalReport {
  std::size_t story_count = 0;
  double mean_tau = 0.0;
  double pmr = 0.0;  // fraction of stories predicted exactly
  double mean_pairwise_ratio = 0.0;
  std::vector<StoryScore> stories;
};

namespace detail {

inline void check_pair(std::span<const std::size_t> pred, std::span<const std::size_t> gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("permutation lengths differ: " + std::to_string(pred.size()) + " vs " +
                          std::to_string(gold.size()));
  }
  if (!search::is_permutation_of_size(pred, pred.size()) ||
      !search::is_permutation_of_size(gold, gold.size())) {
    throw ValidationError("input is not a permutation");
  }
}

// Merge sort inversion count over `a`, which is modified.
inline std::uint64_t count_inversions(std::vector<std::size_t>& a, std::vector<std::size_t>& buf,
                                      std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(a, buf, lo, mid) + count_inversions(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      inv += mid - i;
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace detail

/// Number of item pairs whose relative order in `pred` disagrees with `gold`.
inline std::uint64_t inversions(std::span<const std::size_t> pred,
                                std::span<const std::size_t> gold) {
  detail::check_pair(pred, gold);
  std::vector<std::size_t> gold_rank(gold.size());
  for (std::size_t k = 0; k < gold.size(); ++k) gold_rank[gold[k]] = k;
  std::vector<std::size_t> ranks(pred.size()), buf(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) ranks[k] = gold_rank[pred[k]];
  return detail::count_inversions(ranks, buf, 0, ranks.size());
}

inline double pair_count(std::size_t n) { return static_cast<double>(n) * (n - 1) / 2.0; }

// tau = 1 - 2 * inversions / (N(N-1)/2). A single sentence scores 1.
inline double kendall_tau(std::span<const std::size_t> pred, std::span<const std::size_t> gold) {
  const auto inv = inversions(pred, gold);
  if (pred.size() < 2) return 1.0;
  return 1.0 - 2.0 * static_cast<double>(inv) / pair_count(pred.size());
}

inline bool exact_match(std::span<const std::size_t> pred, std::span<const std::size_t> gold) {
  if (pred.size() != gold.size()) throw ValidationError("permutation lengths differ");
  return std::equal(pred.begin(), pred.end(), gold.begin());
}

// Correct pairs / N(N-1)/2. A single sentence scores 1.
inline double pairwise_ratio(std::span<const std::size_t> pred,
                             std::span<const std::size_t> gold) {
  const auto inv = inversions(pred, gold);
  if (pred.size() < 2) return 1.0;
  const double pairs = pair_count(pred.size());
  return (pairs - static_cast<double>(inv)) / pairs;
}

struct PredictionPair {
  std::string story_id;
  Permutation pred;
  Permutation gold;
};

inline StoryScore score_story(const PredictionPair& p) {
  return {p.story_id, kendall_tau(p.pred, p.gold), exact_match(p.pred, p.gold),
          pairwise_ratio(p.pred, p.gold)};
}

inline EvalReport evaluate(const std::vector<PredictionPair>& pairs) {
  if (pairs.empty()) throw ValidationError("evaluate: no stories");
  EvalReport r;
  r.story_count = pairs.size();
  std::size_t exact = 0;
  for (const auto& p : pairs) {
    r.stories.push_back(score_story(p));
    const auto& s = r.stories.back();
    r.mean_tau += s.tau;
    r.mean_pairwise_ratio += s.pairwise_ratio;
    exact += s.exact_match ? 1 : 0;
  }
  const auto count = static_cast<double>(r.story_count);
  r.mean_tau /= count;
  r.mean_pairwise_ratio /= count;
  r.pmr = static_cast<double>(exact) / count;
  return r;
}

inline nlohmann::json to_json(const EvalReport& r, bool per_story = true) {
  nlohmann::json j = {{"story_count", r.story_count},
                      {"mean_tau", r.mean_tau},
                      {"pmr", r.pmr},
                      {"mean_pairwise_ratio", r.mean_pairwise_ratio}};
  if (per_story) {
    auto rows = nlohmann::json::array();
    for (const auto& s : r.stories) {
      rows.push_back({{"story_id", s.story_id},
                      {"tau", s.tau},
                      {"exact_match", s.exact_match},
                      {"pairwise_ratio", s.pairwise_ratio}});
    }
    j["stories"] = std::move(rows);
  }
  return j;
}

inline constexpr const char* kSummaryCsvHeader = "story_count,mean_tau,pmr,mean_pairwise_ratio";

inline std::string summary_csv_row(const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f", r.story_count, r.mean_tau, r.pmr,
                r.mean_pairwise_ratio);
  return buf;
}

}  // namespace slm::metrics
