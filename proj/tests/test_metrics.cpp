#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "pkbd/metrics.hpp"
#include "pkbd/random.hpp"

using namespace pkbd;

namespace {

double pair_counting_ari(const std::vector<int>& a, const std::vector<int>& b) {
  // Rand-style counts over all pairs: same/same, same/diff, diff/same
  double ss = 0, sd = 0, ds = 0, dd = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool x = a[i] == a[j];
      const bool y = b[i] == b[j];
      (x ? (y ? ss : sd) : (y ? ds : dd)) += 1;
    }
  const double pairs = ss + sd + ds + dd;
  const double same_a = ss + sd;
  const double same_b = ss + ds;
  const double expected = same_a * same_b / pairs;
  const double denom = 0.5 * (same_a + same_b) - expected;
  if (denom == 0.0) return 1.0;
  return (ss - expected) / denom;
}

std::vector<int> random_partition(std::size_t n, int k, Rng& rng) {
  std::vector<int> out(n);
  for (auto& x : out) x = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
  return out;
}

}  // namespace

TEST(Contingency, HandCountedTable) {
  const std::vector<int> truth = {0, 0, 0, 1, 1, 1};
  const std::vector<int> pred = {5, 5, 7, 7, 7, 7};
  const auto ct = contingency(truth, pred);
  ASSERT_EQ(ct.num_classes(), 2u);
  ASSERT_EQ(ct.num_clusters(), 2u);
  EXPECT_EQ(ct.table[0][0], 2);
  EXPECT_EQ(ct.table[0][1], 1);
  EXPECT_EQ(ct.table[1][0], 0);
  EXPECT_EQ(ct.table[1][1], 3);
  EXPECT_EQ(ct.row_sums, (std::vector<std::int64_t>{3, 3}));
  EXPECT_EQ(ct.col_sums, (std::vector<std::int64_t>{2, 4}));
  EXPECT_EQ(ct.n, 6);
  EXPECT_EQ(ct.cluster_labels, (std::vector<int>{5, 7}));
}

TEST(Contingency, DiagonalAndConstant) {
  const std::vector<int> labels = {2, 0, 1, 1, 2};
  const auto ct = contingency(labels, labels);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      if (r != c) {
        EXPECT_EQ(ct.table[r][c], 0);
      }
    }
  const auto one = contingency(labels, std::vector<int>(5, 9));
  EXPECT_EQ(one.num_clusters(), 1u);
  try {
    contingency({1, 2}, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(Assignment, MaximumWeightMatchesBruteForce) {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const std::size_t rows = 1 + rng.index(5), cols = 1 + rng.index(5);
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& r : w)
      for (auto& x : r) x = static_cast<double>(rng.index(20));
    const auto match = max_weight_assignment(w);
    double got = 0;
    std::vector<bool> used(cols, false);
    for (std::size_t r = 0; r < rows; ++r)
      if (match[r] >= 0) {
        ASSERT_FALSE(used[static_cast<std::size_t>(match[r])]);
        used[static_cast<std::size_t>(match[r])] = true;
        got += w[r][static_cast<std::size_t>(match[r])];
      }
    // brute force over injective partial maps
    double best = 0;
    std::vector<bool> taken(cols, false);
    std::function<void(std::size_t, double)> rec = [&](std::size_t r, double acc) {
      if (r == rows) {
        best = std::max(best, acc);
        return;
      }
      rec(r + 1, acc);
      for (std::size_t c = 0; c < cols; ++c)
        if (!taken[c]) {
          taken[c] = true;
          rec(r + 1, acc + w[r][c]);
          taken[c] = false;
        }
    };
    rec(0, 0.0);
    EXPECT_DOUBLE_EQ(got, best);
  }
}

TEST(MacroScores, PerfectClustering) {
  const auto s = macro_precision_recall({0, 0, 1, 1, 2}, {4, 4, 3, 3, 8});
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
}

TEST(MacroScores, SingleClusterFollowsPerClassFormulas) {
  // matched class: p = 1/C, r = 1; the other classes score 0
  for (int c : {2, 3, 5}) {
    std::vector<int> truth;
    for (int k = 0; k < c; ++k)
      for (int i = 0; i < 4; ++i) truth.push_back(k);
    const auto s = macro_precision_recall(truth, std::vector<int>(truth.size(), 0));
    EXPECT_NEAR(s.precision, 1.0 / (c * c), 1e-15);
    EXPECT_NEAR(s.recall, 1.0 / c, 1e-15);
  }
}

TEST(MacroScores, HandCase) {
  // table ((2,1),(0,3)): class 0 -> cluster 0 (p 1, r 2/3), class 1 -> cluster 1 (p 3/4, r 1)
  const auto s = macro_precision_recall({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 1, 1});
  EXPECT_NEAR(s.precision, (1.0 + 0.75) / 2, 1e-15);
  EXPECT_NEAR(s.recall, (2.0 / 3 + 1.0) / 2, 1e-15);
}

TEST(MacroScores, RelabelingInvariantAndBounded) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto truth = random_partition(30, 3, rng);
    auto pred = random_partition(30, 4, rng);
    const auto a = macro_precision_recall(truth, pred);
    for (auto& p : pred) p = 10 - 3 * p;
    const auto b = macro_precision_recall(truth, pred);
    EXPECT_DOUBLE_EQ(a.precision, b.precision);
    EXPECT_DOUBLE_EQ(a.recall, b.recall);
    EXPECT_GE(a.precision, 0.0);
    EXPECT_LE(a.precision, 1.0);
    EXPECT_GE(a.recall, 0.0);
    EXPECT_LE(a.recall, 1.0);
  }
}

TEST(Ari, Examples) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1, 2}, {3, 3, 1, 1, 0}).value, 1.0);
  const std::vector<int> truth = {0, 0, 0, 1, 1, 1};
  const std::vector<int> pred = {0, 0, 1, 1, 1, 1};
  // sum_cells = 1 + 3 = 4, rows = 6, cols = 1 + 6 = 7, E = 42 / 15
  const double expected = (4.0 - 42.0 / 15) / (6.5 - 42.0 / 15);
  EXPECT_NEAR(adjusted_rand_index(truth, pred).value, expected, 1e-15);
  EXPECT_NEAR(adjusted_rand_index(truth, pred).value, pair_counting_ari(truth, pred), 1e-15);
}

TEST(Ari, MatchesPairCountingOnSmallPartitions) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.index(11);
    const auto a = random_partition(n, 1 + static_cast<int>(rng.index(4)), rng);
    const auto b = random_partition(n, 1 + static_cast<int>(rng.index(4)), rng);
    const auto ari = adjusted_rand_index(a, b);
    EXPECT_NEAR(ari.value, pair_counting_ari(a, b), 1e-12);
    EXPECT_LE(ari.value, 1.0 + 1e-15);
  }
}

TEST(Ari, NullModelIsNearZero) {
  Rng rng(4);
  const auto a = random_partition(10000, 3, rng);
  const auto b = random_partition(10000, 3, rng);
  EXPECT_LT(std::abs(adjusted_rand_index(a, b).value), 0.05);
}

TEST(Ari, DegenerateAndErrors) {
  const auto r = adjusted_rand_index({1, 1, 1}, {2, 2, 2});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_FALSE(adjusted_rand_index({0, 1, 1}, {0, 1, 1}).degenerate);
  EXPECT_THROW(adjusted_rand_index({1}, {1}), Error);
  EXPECT_THROW(adjusted_rand_index({1, 2}, {1}), Error);
}
