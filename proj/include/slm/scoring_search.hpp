#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slm/error.hpp"

namespace slm::search {

using Permutation = std::vector<std::size_t>;

/// Successor scores: entry (i, j) scores sentence j as the one following
/// sentence i. The diagonal holds -inf and is never read as a score.
class PairScoreMatrix {
 public:
  PairScoreMatrix() = default;
  explicit PairScoreMatrix(std::size_t n)
      : n_(n), scores_(n * n, 0.0) {
    for (std::size_t i = 0; i < n; ++i) (*this)(i, i) = kDiagonal;
  }

  static constexpr double kDiagonal = -std::numeric_limits<double>::infinity();

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return scores_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return scores_[i * n_ + j]; }

  // Multiplies every off-diagonal entry by `factor`.
  PairScoreMatrix scaled(double factor) const {
    PairScoreMatrix m = *this;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (i != j) m(i, j) *= factor;
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> scores_;
};

enum class Strategy { BruteForce, NearestNeighbor };

inline std::string to_string(Strategy s) {
  return s == Strategy::BruteForce ? "brute-force" : "nearest-neighbor";
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "brute-force" || name == "bf") return Strategy::BruteForce;
  if (name == "nearest-neighbor" || name == "nn") return Strategy::NearestNeighbor;
  throw ValidationError("unknown search strategy '" + std::string(name) + "'");
}

struct OrderingResult {
  Permutation order;
  double total_score = 0.0;
  Strategy strategy = Strategy::BruteForce;
  bool ties_broken = false;
};

inline bool is_permutation_of_size(std::span<const std::size_t> p, std::size_t n) {
  if (p.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (auto v : p) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine of vectors with different lengths");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  if (uu == 0.0 || vv == 0.0) throw ValidationError("cosine of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

/// Entry (i, j) = cosine(candidates[i], embeddings[j]).
template <typename Vec>
PairScoreMatrix pair_scores(const std::vector<Vec>& candidates, const std::vector<Vec>& embeddings) {
  if (candidates.size() != embeddings.size()) {
    throw ValidationError("pair_scores: " + std::to_string(candidates.size()) +
                          " candidates for " + std::to_string(embeddings.size()) + " sentences");
  }
  const std::size_t n = candidates.size();
  PairScoreMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) m(i, j) = cosine(candidates[i], embeddings[j]);
  return m;
}

/// Sum of successor scores along consecutive pairs of `p`.
inline double total_score(const PairScoreMatrix& m, std::span<const std::size_t> p) {
  if (!is_permutation_of_size(p, m.size())) {
    throw ValidationError("total_score: not a permutation of size " + std::to_string(m.size()));
  }
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) total += m(p[k], p[k + 1]);
  return total;
}

inline constexpr std::size_t kDefaultBruteForceCap = 8;

// Visits permutations in lexicographic order and keeps the first strict
// maximum, which is the lexicographically smallest among ties.
inline OrderingResult brute_force_order(const PairScoreMatrix& m,
                                        std::size_t cap = kDefaultBruteForceCap) {
  const std::size_t n = m.size();
  if (n == 0) throw ValidationError("brute_force_order: empty matrix");
  if (n > cap) {
    throw SearchCapError("brute-force search is capped at n=" + std::to_string(cap) +
                         " (got n=" + std::to_string(n) + "); use nearest-neighbor");
  }
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  OrderingResult best{p, -std::numeric_limits<double>::infinity(), Strategy::BruteForce, false};
  do {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) total += m(p[k], p[k + 1]);
    if (total > best.total_score) {
      best.total_score = total;
      best.order = p;
      best.ties_broken = false;
    } else if (total == best.total_score) {
      best.ties_broken = true;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// Greedy chains from every start; best chain wins, ties to the
// lexicographically smallest permutation.
inline OrderingResult nn_order(const PairScoreMatrix& m) {
  const std::size_t n = m.size();
  if (n == 0) throw ValidationError("nn_order: empty matrix");
  OrderingResult best{{}, -std::numeric_limits<double>::infinity(), Strategy::NearestNeighbor,
                      false};
  for (std::size_t start = 0; start < n; ++start) {
    Permutation chain{start};
    std::vector<bool> used(n, false);
    used[start] = true;
    double total = 0.0;
    while (chain.size() < n) {
      const std::size_t last = chain.back();
      std::size_t pick = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (!used[j] && (pick == n || m(last, j) > m(last, pick))) pick = j;
      }
      used[pick] = true;
      total += m(last, pick);
      chain.push_back(pick);
    }
    if (total > best.total_score) {
      best.total_score = total;
      best.order = std::move(chain);
      best.ties_broken = false;
    } else if (total == best.total_score) {
      // chains start with their start index, so the earlier chain is already
      // the lexicographically smaller one
      best.ties_broken = true;
    }
  }
  return best;
}

inline OrderingResult order(const PairScoreMatrix& m, Strategy strategy,
                            std::size_t cap = kDefaultBruteForceCap) {
  return strategy == Strategy::BruteForce ? brute_force_order(m, cap) : nn_order(m);
}

/// Debug dump: {"n": n, "scores": row-major with null on the diagonal}.
inline nlohmann::json to_json(const PairScoreMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j) row.push_back(nullptr);
      else row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return {{"n", m.size()}, {"scores", rows}};
}

inline PairScoreMatrix matrix_from_json(const nlohmann::json& j) {
  const auto n = j.at("n").get<std::size_t>();
  const auto& rows = j.at("scores");
  if (rows.size() != n) throw ValidationError("matrix dump: row count differs from n");
  PairScoreMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw ValidationError("matrix dump: ragged row");
    for (std::size_t j2 = 0; j2 < n; ++j2)
      if (i != j2) m(i, j2) = rows[i][j2].get<double>();
  }
  return m;
}

}  // namespace slm::search
