#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slm/corpus.hpp"
#include "slm/embedding_io.hpp"
#include "slm/error.hpp"
#include "slm/language_model.hpp"
#include "slm/meta.hpp"
#include "slm/metrics.hpp"
#include "slm/ngram_overlap.hpp"
#include "slm/scoring_search.hpp"

namespace slm::pipeline {

using embedding::EmbeddedStory;
using search::Permutation;
using search::Strategy;

enum class Scorer { LmCosine, NgramOverlap, CbowCosine };

inline std::string to_string(Scorer s) {
  switch (s) {
    case Scorer::LmCosine: return "lm-cosine";
    case Scorer::NgramOverlap: return "ngram-overlap";
    case Scorer::CbowCosine: return "cbow-cosine";
  }
  return "lm-cosine";
}

inline Scorer parse_scorer(std::string_view name) {
  if (name == "lm-cosine") return Scorer::LmCosine;
  if (name == "ngram-overlap") return Scorer::NgramOverlap;
  if (name == "cbow-cosine") return Scorer::CbowCosine;
  throw ValidationError("unknown scorer '" + std::string(name) + "'");
}

/// Shuffle seed of one story, derived from the run seed and its id so a story
/// can be reproduced without replaying the corpus.
inline std::uint64_t story_seed(std::uint64_t global_seed, std::string_view story_id) {
  return combine_seed(global_seed, fnv1a64(story_id));
}

/// Permutes sentences and embeddings together and records the gold position of
/// each shuffled sentence. `story` must be in gold order.
inline EmbeddedStory shuffle_embedded(const EmbeddedStory& story, std::uint64_t seed) {
  if (story.gold_perm) throw ValidationError("story '" + story.story_id + "' is already shuffled");
  std::vector<std::size_t> order(story.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  EmbeddedStory out{story.story_id, story.encoder, {}, {}, order};
  for (auto idx : order) {
    out.sentences.push_back(story.sentences.at(idx));
    out.embeddings.push_back(story.embeddings.at(idx));
  }
  return out;
}

/// Produces candidate successors for a shuffled story.
using CandidateFn = std::function<lm::CandidateSet(const EmbeddedStory&)>;

inline CandidateFn model_candidates(const lm::ModelParams& params) {
  return [&params](const EmbeddedStory& s) { return lm::candidate_next(params, s); };
}

// c_i = embedding of the gold successor; needs gold_perm.
inline CandidateFn gold_oracle_candidates() {
  return [](const EmbeddedStory& s) { return lm::gold_next_candidates(s); };
}

// Candidates precomputed in gold order (e.g. read from a file) keyed by story id.
inline CandidateFn precomputed_candidates(const std::vector<EmbeddedStory>& gold_ordered) {
  std::map<std::string, std::vector<embedding::Vector>> by_id;
  for (const auto& s : gold_ordered) by_id.emplace(s.story_id, s.embeddings);
  return [by_id = std::move(by_id)](const EmbeddedStory& s) {
    auto it = by_id.find(s.story_id);
    if (it == by_id.end()) throw ValidationError("no candidates for story '" + s.story_id + "'");
    if (it->second.size() != s.size()) {
      throw ValidationError("candidate count mismatch for story '" + s.story_id + "'");
    }
    lm::CandidateSet out;
    for (std::size_t k = 0; k < s.size(); ++k) out.push_back(it->second[s.gold_perm->at(k)]);
    return out;
  };
}

inline search::PairScoreMatrix score_matrix(const EmbeddedStory& shuffled, Scorer scorer,
                                            const CandidateFn& candidates) {
  switch (scorer) {
    case Scorer::LmCosine:
      if (!candidates) throw ValidationError("lm-cosine scoring needs a model or candidates");
      return search::pair_scores(candidates(shuffled), shuffled.embeddings);
    case Scorer::CbowCosine:
      return search::pair_scores(shuffled.embeddings, shuffled.embeddings);
    case Scorer::NgramOverlap:
      if (shuffled.size() < 2) return search::PairScoreMatrix(shuffled.size());
      return search::ngram_overlap_scores(shuffled.sentences);
  }
  throw Error("unreachable scorer");
}

struct OrderOptions {
  Scorer scorer = Scorer::LmCosine;
  Strategy strategy = Strategy::BruteForce;
  std::uint64_t seed = 0;
  std::size_t brute_force_cap = search::kDefaultBruteForceCap;
};

struct Prediction {
  std::string story_id;
  Permutation predicted_order;  // gold positions, in predicted order
  Permutation shuffled_order;   // indices into the shuffled story
  double total_score = 0.0;
  Strategy strategy = Strategy::BruteForce;
  Scorer scorer = Scorer::LmCosine;
  std::uint64_t shuffle_seed = 0;
  bool ties_broken = false;
};

/// Shuffles a gold-ordered story, scores it and searches for the best order.
inline Prediction order_story(const EmbeddedStory& gold, const OrderOptions& opt,
                              const CandidateFn& candidates = {}) {
  const auto seed = story_seed(opt.seed, gold.story_id);
  const auto shuffled = shuffle_embedded(gold, seed);
  const auto m = score_matrix(shuffled, opt.scorer, candidates);
  const auto result = search::order(m, opt.strategy, opt.brute_force_cap);
  Prediction p{gold.story_id, {}, result.order, result.total_score, opt.strategy,
               opt.scorer,    seed, result.ties_broken};
  for (auto k : result.order) p.predicted_order.push_back(shuffled.gold_perm->at(k));
  return p;
}

inline std::vector<Prediction> order_corpus(const std::vector<EmbeddedStory>& stories,
                                            const OrderOptions& opt,
                                            const CandidateFn& candidates = {}) {
  std::vector<Prediction> out;
  out.reserve(stories.size());
  for (const auto& s : stories) out.push_back(order_story(s, opt, candidates));
  return out;
}

inline Permutation identity(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

/// Scores predictions against gold stories of the given sizes, keyed by id.
inline metrics::EvalReport evaluate(const std::vector<Prediction>& predictions,
                                    const std::map<std::string, std::size_t>& gold_sizes) {
  if (predictions.empty()) throw ValidationError("no predictions to evaluate");
  std::vector<metrics::PredictionPair> pairs;
  pairs.reserve(predictions.size());
  for (const auto& p : predictions) {
    auto it = gold_sizes.find(p.story_id);
    if (it == gold_sizes.end()) {
      throw ValidationError("story_id '" + p.story_id + "' is missing from the gold corpus");
    }
    if (p.predicted_order.size() != it->second) {
      throw ValidationError("story '" + p.story_id + "': predicted " +
                            std::to_string(p.predicted_order.size()) + " sentences, gold has " +
                            std::to_string(it->second));
    }
    pairs.push_back({p.story_id, p.predicted_order, identity(it->second)});
  }
  return metrics::evaluate(pairs);
}

template <typename StoryLike>
std::map<std::string, std::size_t> gold_sizes(const std::vector<StoryLike>& stories) {
  std::map<std::string, std::size_t> sizes;
  for (const auto& s : stories) sizes[s.story_id] = s.sentences.size();
  return sizes;
}

// ---------------------------------------------------------------------------
// Prediction files

inline nlohmann::json to_json(const Prediction& p) {
  return {{"story_id", p.story_id},
          {"predicted_order", p.predicted_order},
          {"shuffled_order", p.shuffled_order},
          {"total_score", p.total_score},
          {"strategy", search::to_string(p.strategy)},
          {"scorer", to_string(p.scorer)},
          {"shuffle_seed", p.shuffle_seed},
          {"ties_broken", p.ties_broken}};
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  p.story_id = j.at("story_id").get<std::string>();
  p.predicted_order = j.at("predicted_order").get<Permutation>();
  if (!search::is_permutation_of_size(p.predicted_order, p.predicted_order.size())) {
    throw ValidationError("story '" + p.story_id + "': predicted_order is not a permutation");
  }
  p.shuffled_order = j.value("shuffled_order", Permutation{});
  p.total_score = j.value("total_score", 0.0);
  p.strategy = search::parse_strategy(j.value("strategy", std::string("brute-force")));
  p.scorer = parse_scorer(j.value("scorer", std::string("lm-cosine")));
  p.shuffle_seed = j.value("shuffle_seed", std::uint64_t{0});
  p.ties_broken = j.value("ties_broken", false);
  return p;
}

inline void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions,
                              const std::optional<nlohmann::json>& meta = std::nullopt) {
  if (meta) out << metadata_record(*meta).dump() << '\n';
  for (const auto& p : predictions) out << to_json(p).dump() << '\n';
}

inline std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (is_metadata_record(j)) continue;
      out.push_back(prediction_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace slm::pipeline
