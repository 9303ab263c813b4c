#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slm/corpus.hpp"
#include "slm/error.hpp"
#include "slm/meta.hpp"
#include "slm/random.hpp"
#include "slm/text.hpp"

namespace slm::embedding {

using Vector = std::vector<double>;

/// Sentences of one story with one embedding each. When the story was built
/// from a shuffle, `gold_perm[k]` is the gold position of sentence k.
struct EmbeddedStory {
  std::string story_id;
  std::string encoder;
  std::vector<std::string> sentences;
  std::vector<Vector> embeddings;
  std::optional<std::vector<std::size_t>> gold_perm;

  std::size_t size() const noexcept { return embeddings.size(); }
  std::size_t dim() const noexcept { return embeddings.empty() ? 0 : embeddings.front().size(); }
  friend bool operator==(const EmbeddedStory&, const EmbeddedStory&) = default;
};

inline constexpr std::string_view kToyEncoderTag = "toy-cbow-v1";
inline constexpr std::string_view kToyTokenHash = "fnv1a64+splitmix64";

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline Vector normalize(std::span<const double> v) {
  const double norm = std::sqrt(squared_norm(v));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("cannot normalize a zero or non-finite vector");
  }
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

namespace detail {

// Uniform direction on the sphere from a 64-bit key: cube draw, normalized.
inline Vector keyed_unit_vector(std::uint64_t key, std::size_t d) {
  Rng rng(key);
  for (;;) {
    Vector v(d);
    for (double& x : v) x = rng.symmetric(1.0);
    if (squared_norm(v) > 1e-24) return normalize(v);
  }
}

inline Vector token_vector(std::string_view token, std::size_t d, std::uint64_t seed) {
  return keyed_unit_vector(combine_seed(seed, fnv1a64(token)), d);
}

// Mean of `vectors`; a zero mean is replaced by a tiny vector keyed by
// `fallback_key` so that cosine stays defined.
inline Vector mean_or_fallback(const std::vector<Vector>& vectors, std::size_t d,
                               std::uint64_t fallback_key) {
  Vector mean(d, 0.0);
  for (const auto& v : vectors)
    for (std::size_t k = 0; k < d; ++k) mean[k] += v[k];
  for (double& x : mean) x /= static_cast<double>(vectors.size());
  if (squared_norm(mean) == 0.0) {
    mean = keyed_unit_vector(fallback_key, d);
    for (double& x : mean) x *= 1e-9;
  }
  return mean;
}

}  // namespace detail

/// Continuous bag-of-words sentence vector: the mean of one pseudo-random unit
/// vector per token. Word order is ignored, so sentences with the same token
/// multiset embed identically.
inline Vector toy_cbow_embed(std::string_view sentence, std::size_t d, std::uint64_t seed) {
  if (d == 0) throw ValidationError("embedding dimension must be positive");
  auto tokens = text::tokenize(sentence);
  if (tokens.empty()) {
    throw ValidationError("sentence has no tokens: '" + std::string(sentence) + "'");
  }
  // sorted so that the floating-point sum depends only on the token multiset
  std::sort(tokens.begin(), tokens.end());
  std::vector<Vector> vectors;
  vectors.reserve(tokens.size());
  for (const auto& t : tokens) vectors.push_back(detail::token_vector(t, d, seed));
  return detail::mean_or_fallback(vectors, d, combine_seed(seed, fnv1a64(sentence)));
}

inline EmbeddedStory embed_story(const corpus::Story& story, std::size_t d, std::uint64_t seed) {
  EmbeddedStory out{story.story_id, std::string(kToyEncoderTag), story.sentences, {}, {}};
  out.embeddings.reserve(story.size());
  for (const auto& s : story.sentences) out.embeddings.push_back(toy_cbow_embed(s, d, seed));
  return out;
}

// ---------------------------------------------------------------------------
// Interchange format

inline nlohmann::json to_json(const EmbeddedStory& s) {
  nlohmann::json j = {{"story_id", s.story_id},
                      {"encoder", s.encoder},
                      {"dim", s.dim()},
                      {"sentences", s.sentences},
                      {"embeddings", s.embeddings}};
  if (s.gold_perm) j["gold_perm"] = *s.gold_perm;
  return j;
}

// Doubles are emitted in shortest round-trip form, so reading the file back
// yields bit-identical vectors.
inline void write_embeddings(std::ostream& out, const std::vector<EmbeddedStory>& stories,
                             const std::optional<nlohmann::json>& meta = std::nullopt) {
  if (meta) out << metadata_record(*meta).dump() << '\n';
  for (const auto& s : stories) out << to_json(s).dump() << '\n';
}

inline void save_embeddings(const std::string& path, const std::vector<EmbeddedStory>& stories,
                            const std::optional<nlohmann::json>& meta = std::nullopt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_embeddings(out, stories, meta);
}

inline std::vector<EmbeddedStory> read_embeddings(std::istream& in) {
  std::vector<EmbeddedStory> stories;
  std::optional<std::size_t> file_dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (is_metadata_record(j)) continue;
    const std::string where = "record " + std::to_string(stories.size());
    const auto fail = [&](const std::string& msg) { throw ParseError(lineno, where + ": " + msg); };

    if (!j.is_object()) fail("not an object");
    for (const char* key : {"story_id", "encoder", "dim", "sentences", "embeddings"}) {
      if (!j.contains(key)) fail(std::string("missing field '") + key + "'");
    }
    EmbeddedStory s;
    try {
      s.story_id = j["story_id"].get<std::string>();
      s.encoder = j["encoder"].get<std::string>();
      s.sentences = j["sentences"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    if (!j["dim"].is_number_integer() || j["dim"].get<std::int64_t>() <= 0) {
      fail("dim must be a positive integer");
    }
    const auto dim = j["dim"].get<std::size_t>();
    if (file_dim && *file_dim != dim) {
      fail("dimension mismatch: dim " + std::to_string(dim) + ", file uses " +
           std::to_string(*file_dim));
    }
    file_dim = dim;

    const auto& rows = j["embeddings"];
    if (!rows.is_array()) fail("embeddings must be an array");
    if (rows.size() != s.sentences.size()) {
      fail(std::to_string(rows.size()) + " embeddings for " +
           std::to_string(s.sentences.size()) + " sentences");
    }
    if (s.sentences.empty()) fail("story has no sentences");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = rows[k];
      if (!row.is_array() || row.size() != dim) {
        fail("embedding " + std::to_string(k) + " has length " +
             std::to_string(row.is_array() ? row.size() : 0) + ", expected dim " +
             std::to_string(dim));
      }
      Vector v;
      v.reserve(dim);
      for (const auto& x : row) {
        if (!x.is_number()) fail("embedding " + std::to_string(k) + " has a non-numeric entry");
        const double value = x.get<double>();
        if (!std::isfinite(value)) fail("embedding " + std::to_string(k) + " is not finite");
        v.push_back(value);
      }
      if (squared_norm(v) == 0.0) fail("embedding " + std::to_string(k) + " is the zero vector");
      s.embeddings.push_back(std::move(v));
    }
    if (j.contains("gold_perm")) s.gold_perm = j["gold_perm"].get<std::vector<std::size_t>>();
    stories.push_back(std::move(s));
  }
  return stories;
}

inline std::vector<EmbeddedStory> load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open embedding file '" + path + "'");
  return read_embeddings(in);
}

}  // namespace slm::embedding
