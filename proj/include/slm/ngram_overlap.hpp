#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "slm/error.hpp"
#include "slm/scoring_search.hpp"
#include "slm/text.hpp"

namespace slm::search {

namespace detail {

using Ngram = std::vector<std::string>;

inline std::map<Ngram, std::size_t> count_ngrams(const std::vector<std::string>& tokens,
                                                 std::size_t order) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + order))];
  }
  return counts;
}

}  // namespace detail

/// Sentence-level BLEU of `candidate` against a single `reference`, with
/// add-one smoothing on every n-gram precision:
///   p_n = (clipped matches + 1) / (candidate n-grams + 1)
///   BP  = 1 if c > r else exp(1 - r / c)
///   score = BP * exp(mean_n log p_n)
inline double smoothed_bleu(const std::vector<std::string>& candidate,
                            const std::vector<std::string>& reference, std::size_t max_n = 4) {
  if (candidate.empty() || reference.empty()) {
    throw ValidationError("smoothed_bleu: empty sentence");
  }
  if (max_n == 0) throw ValidationError("smoothed_bleu: max_n must be positive");
  double log_sum = 0.0;
  for (std::size_t order = 1; order <= max_n; ++order) {
    const auto cand = detail::count_ngrams(candidate, order);
    const auto ref = detail::count_ngrams(reference, order);
    std::size_t matches = 0, total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matches += std::min(count, it->second);
    }
    log_sum += std::log((static_cast<double>(matches) + 1.0) / (static_cast<double>(total) + 1.0));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

/// Entry (i, j) is the smoothed BLEU of sentence j against sentence i.
inline PairScoreMatrix ngram_overlap_scores(const std::vector<std::string>& sentences,
                                            std::size_t max_n = 4) {
  if (sentences.size() < 2) throw ValidationError("ngram_overlap_scores needs at least 2 sentences");
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(sentences.size());
  for (const auto& s : sentences) {
    tokens.push_back(text::tokenize(s));
    if (tokens.back().empty()) throw ValidationError("ngram_overlap_scores: empty sentence");
  }
  PairScoreMatrix m(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i)
    for (std::size_t j = 0; j < sentences.size(); ++j)
      if (i != j) m(i, j) = smoothed_bleu(tokens[j], tokens[i], max_n);
  return m;
}

}  // namespace slm::search
