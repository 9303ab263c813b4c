#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "slm/random.hpp"
#include "slm/scoring_search.hpp"

namespace {

using namespace slm::search;

PairScoreMatrix random_matrix(std::size_t n, slm::Rng& rng) {
  PairScoreMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) m(i, j) = rng.symmetric(1.0);
  return m;
}

// Oracle: depth-first enumeration of all Hamiltonian paths, written without
// std::next_permutation. Returns the best total.
double exhaustive_best(const PairScoreMatrix& m) {
  const std::size_t n = m.size();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> path;
  std::vector<bool> used(n, false);
  auto dfs = [&](auto&& self) -> void {
    if (path.size() == n) {
      double total = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) total += m(path[k], path[k + 1]);
      best = std::max(best, total);
      return;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      used[j] = true;
      path.push_back(j);
      self(self);
      path.pop_back();
      used[j] = false;
    }
  };
  dfs(dfs);
  return best;
}

TEST(Cosine, Examples) {
  const std::vector<double> e{0.3, -0.2, 0.9};
  EXPECT_NEAR(cosine(e, e), 1.0, 1e-15);
  EXPECT_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 0.70710678, 1e-8);
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), slm::ValidationError);
}

TEST(Cosine, ClampedToUnitInterval) {
  slm::Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.symmetric(1e3);
    std::vector<double> scaled = v;
    for (double& x : scaled) x *= 3.7;
    const double c = cosine(v, scaled);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(cosine(v, std::vector<double>(v.rbegin(), v.rend())), -1.0);
  }
}

TEST(PairScores, TwoSentencesHaveTwoEntries) {
  std::vector<std::vector<double>> e{{1, 0}, {0.5, 0.5}};
  const auto m = pair_scores(e, e);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_TRUE(std::isinf(m(0, 0)) && m(0, 0) < 0);
  EXPECT_TRUE(std::isinf(m(1, 1)) && m(1, 1) < 0);
  EXPECT_TRUE(std::isfinite(m(0, 1)) && std::isfinite(m(1, 0)));
}

TEST(PairScores, ShiftedCandidatesPeakAtSuccessor) {
  slm::Rng rng(8);
  std::vector<std::vector<double>> e(5, std::vector<double>(6));
  for (auto& v : e)
    for (double& x : v) x = rng.symmetric(1.0);
  std::vector<std::vector<double>> c(e.begin() + 1, e.end());
  c.push_back(e[0]);
  const auto m = pair_scores(c, e);
  for (std::size_t i = 0; i + 1 < 5; ++i) {
    EXPECT_NEAR(m(i, i + 1), 1.0, 1e-12);
    for (std::size_t j = 0; j < 5; ++j) {
      if (j != i) {
        EXPECT_LE(m(i, j), m(i, i + 1));
      }
    }
  }
}

TEST(PairScores, MatchesDirectFormula) {
  slm::Rng rng(12);
  std::vector<std::vector<double>> c(4, std::vector<double>(3)), e(4, std::vector<double>(3));
  for (auto* set : {&c, &e})
    for (auto& v : *set)
      for (double& x : v) x = rng.symmetric(2.0);
  const auto m = pair_scores(c, e);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      double dot = 0, cc = 0, ee = 0;
      for (int k = 0; k < 3; ++k) {
        dot += c[i][k] * e[j][k];
        cc += c[i][k] * c[i][k];
        ee += e[j][k] * e[j][k];
      }
      EXPECT_NEAR(m(i, j), dot / std::sqrt(cc * ee), 1e-14);
      EXPECT_LE(std::abs(m(i, j)), 1.0);
    }
  EXPECT_THROW(pair_scores(c, std::vector<std::vector<double>>(3, {1, 0, 0})),
               slm::ValidationError);
}

TEST(TotalScore, Definition) {
  PairScoreMatrix one(1);
  EXPECT_EQ(total_score(one, Permutation{0}), 0.0);
  PairScoreMatrix m(3);
  m(0, 1) = 0.25;
  m(1, 2) = -0.5;
  m(2, 0) = 0.75;
  EXPECT_EQ(total_score(m, Permutation{0, 1, 2}), 0.25 + -0.5);
  EXPECT_EQ(total_score(m, Permutation{1, 2, 0}), -0.5 + 0.75);
  EXPECT_THROW(total_score(m, Permutation{0, 0, 1}), slm::ValidationError);
  EXPECT_THROW(total_score(m, Permutation{0, 1}), slm::ValidationError);
}

TEST(TotalScore, MatchesNaiveLoop) {
  slm::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_matrix(6, rng);
    Permutation p{0, 1, 2, 3, 4, 5};
    rng.shuffle(p);
    double naive = 0.0;
    for (std::size_t k = 1; k < p.size(); ++k) naive += m(p[k - 1], p[k]);
    EXPECT_EQ(total_score(m, p), naive);
  }
}

TEST(BruteForce, SmallCases) {
  const auto single = brute_force_order(PairScoreMatrix(1));
  EXPECT_EQ(single.order, Permutation{0});
  EXPECT_EQ(single.total_score, 0.0);

  PairScoreMatrix m(2);
  m(0, 1) = 0.9;
  m(1, 0) = 0.1;
  const auto r = brute_force_order(m);
  EXPECT_EQ(r.order, (Permutation{0, 1}));
  EXPECT_DOUBLE_EQ(r.total_score, 0.9);
  EXPECT_FALSE(r.ties_broken);
}

TEST(BruteForce, TiesGoToLexicographicallySmallest) {
  PairScoreMatrix m(3);  // all off-diagonal entries zero
  const auto r = brute_force_order(m);
  EXPECT_EQ(r.order, (Permutation{0, 1, 2}));
  EXPECT_TRUE(r.ties_broken);
}

TEST(BruteForce, EqualsExhaustiveMaximum) {
  slm::Rng rng(5);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto m = random_matrix(n, rng);
      const auto r = brute_force_order(m);
      ASSERT_TRUE(is_permutation_of_size(r.order, n));
      const double oracle = exhaustive_best(m);
      ASSERT_NEAR(r.total_score, oracle, 1e-12);
      ASSERT_EQ(r.total_score, total_score(m, r.order));
    }
  }
}

TEST(BruteForce, CapIsEnforced) {
  EXPECT_THROW(brute_force_order(PairScoreMatrix(9)), slm::SearchCapError);
  EXPECT_THROW(brute_force_order(PairScoreMatrix(4), 3), slm::SearchCapError);
  EXPECT_NO_THROW(brute_force_order(PairScoreMatrix(8)));
}

TEST(BruteForce, ArgmaxInvariantUnderPositiveScaling) {
  slm::Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_matrix(5, rng);
    // powers of two keep every sum exact, so the tie structure is preserved
    for (double factor : {0.5, 2.0, 1024.0}) {
      EXPECT_EQ(brute_force_order(m).order, brute_force_order(m.scaled(factor)).order);
    }
  }
}

TEST(NearestNeighbor, SingleSentence) {
  EXPECT_EQ(nn_order(PairScoreMatrix(1)).order, Permutation{0});
}

TEST(NearestNeighbor, GreedyOptimalMatchesBruteForce) {
  // m(i, i+1) = 1 dominates every row: greedy from 0 is the optimum
  slm::Rng rng(2);
  PairScoreMatrix m(5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      if (i != j) m(i, j) = (j == i + 1) ? 1.0 : rng.symmetric(0.5);
  const auto nn = nn_order(m);
  const auto bf = brute_force_order(m);
  EXPECT_EQ(nn.order, bf.order);
  EXPECT_EQ(nn.total_score, bf.total_score);
}

TEST(NearestNeighbor, NeverBeatsBruteForceAndSometimesLoses) {
  slm::Rng rng(44);
  bool strict = false;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto m = random_matrix(4, rng);
    const auto nn = nn_order(m);
    const auto bf = brute_force_order(m);
    ASSERT_TRUE(is_permutation_of_size(nn.order, 4));
    ASSERT_EQ(nn.total_score, total_score(m, nn.order));
    ASSERT_GE(bf.total_score, nn.total_score);
    strict |= bf.total_score > nn.total_score;
  }
  EXPECT_TRUE(strict);
}

// Found by exhaustive search over small integer matrices (scaled by 1/4) and
// checked with an independent Python enumeration: greedy from 3 grabs the 0.75
// edge into 0, after which only poor edges remain.
TEST(NearestNeighbor, FrozenStrictGap) {
  const double rows[4][4] = {{0, -2, -2, -2}, {2, 0, 0, -1}, {3, 2, 0, -1}, {3, 1, 3, 0}};
  PairScoreMatrix m(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) m(i, j) = rows[i][j] / 4.0;
  const auto nn = nn_order(m);
  const auto bf = brute_force_order(m);
  EXPECT_EQ(nn.order, (Permutation{3, 0, 1, 2}));
  EXPECT_EQ(nn.total_score, 0.25);
  EXPECT_EQ(bf.order, (Permutation{3, 2, 1, 0}));
  EXPECT_EQ(bf.total_score, 1.75);
}

TEST(MatrixDump, RoundTrip) {
  slm::Rng rng(1);
  const auto m = random_matrix(4, rng);
  const auto j = to_json(m);
  EXPECT_TRUE(j["scores"][2][2].is_null());
  const auto back = matrix_from_json(nlohmann::json::parse(j.dump()));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(back(i, k), m(i, k));
}

}  // namespace
