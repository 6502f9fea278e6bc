#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "pkbd/errors.hpp"

namespace pkbd {

/// Cross-tabulation of true classes (rows) against predicted clusters
/// (columns). Labels are mapped to indices in increasing label order.
struct Contingency {
  std::vector<int> class_labels;
  std::vector<int> cluster_labels;
  std::vector<std::vector<std::int64_t>> table;  // classes x clusters
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t n = 0;

  std::size_t num_classes() const noexcept { return class_labels.size(); }
  std::size_t num_clusters() const noexcept { return cluster_labels.size(); }
};

inline Contingency contingency(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, "label vectors differ in length");
  if (truth.empty()) throw Error(ErrorCode::InvalidParameter, "need at least one label");
  std::map<int, std::size_t> rows;
  std::map<int, std::size_t> cols;
  for (int t : truth) rows.emplace(t, 0);
  for (int p : predicted) cols.emplace(p, 0);
  Contingency ct;
  for (auto& [label, idx] : rows) {
    idx = ct.class_labels.size();
    ct.class_labels.push_back(label);
  }
  for (auto& [label, idx] : cols) {
    idx = ct.cluster_labels.size();
    ct.cluster_labels.push_back(label);
  }
  ct.table.assign(rows.size(), std::vector<std::int64_t>(cols.size(), 0));
  ct.row_sums.assign(rows.size(), 0);
  ct.col_sums.assign(cols.size(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t r = rows[truth[i]];
    const std::size_t c = cols[predicted[i]];
    ++ct.table[r][c];
    ++ct.row_sums[r];
    ++ct.col_sums[c];
  }
  ct.n = static_cast<std::int64_t>(truth.size());
  return ct;
}

/// Maximum-weight one-to-one assignment of rows to columns on a rectangular
/// weight matrix (Hungarian method with potentials, padded to square with
/// zero weights). Returns, for every row, its matched column or -1.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows == 0 ? 0 : weight.front().size();
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  auto cost = [&](std::size_t i, std::size_t j) -> double {
    return (i < rows && j < cols) ? -weight[i][j] : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) match[p[j] - 1] = static_cast<int>(j - 1);
  return match;
}

struct MacroScores {
  double precision;
  double recall;
};

/// Macro-averaged precision and recall over true classes. Each class is
/// matched to at most one cluster by maximum-weight assignment on the counts;
/// for class t with matched cluster c: a_t = n_tc, b_t = |c| - n_tc and
/// c_t = |t| - n_tc. Unmatched classes and empty denominators score 0.
/// Matchings tied on total count are ranked by the summed p_t + r_t and then
/// by the summed p_t, so the result does not depend on how clusters are
/// labeled.
inline MacroScores macro_precision_recall(const Contingency& ct) {
  const double classes_plus_one = static_cast<double>(ct.num_classes() + 1);
  // both tie-breaks together add less than 1 to any matching's total
  const double tie1 = 0.25 / classes_plus_one;
  const double tie2 = tie1 * 1e-6;
  std::vector<std::vector<double>> w(ct.num_classes(), std::vector<double>(ct.num_clusters()));
  for (std::size_t r = 0; r < ct.num_classes(); ++r)
    for (std::size_t c = 0; c < ct.num_clusters(); ++c) {
      const double a = static_cast<double>(ct.table[r][c]);
      const double p = ct.col_sums[c] > 0 ? a / static_cast<double>(ct.col_sums[c]) : 0.0;
      const double rc = ct.row_sums[r] > 0 ? a / static_cast<double>(ct.row_sums[r]) : 0.0;
      w[r][c] = a + tie1 * (p + rc) + tie2 * p;
    }
  const auto match = max_weight_assignment(w);
  double p_sum = 0.0;
  double r_sum = 0.0;
  for (std::size_t t = 0; t < ct.num_classes(); ++t) {
    if (match[t] < 0) continue;
    const auto c = static_cast<std::size_t>(match[t]);
    const double a = static_cast<double>(ct.table[t][c]);
    const double col = static_cast<double>(ct.col_sums[c]);
    const double row = static_cast<double>(ct.row_sums[t]);
    if (col > 0.0) p_sum += a / col;
    if (row > 0.0) r_sum += a / row;
  }
  const double classes = static_cast<double>(ct.num_classes());
  return {p_sum / classes, r_sum / classes};
}

inline MacroScores macro_precision_recall(const std::vector<int>& truth,
                                          const std::vector<int>& predicted) {
  return macro_precision_recall(contingency(truth, predicted));
}

struct AriResult {
  double value;
  bool degenerate;  // both partitions trivial; value is 1 by convention
};

inline double choose2(double x) { return 0.5 * x * (x - 1.0); }

/// Hubert-Arabie adjusted Rand index from the contingency table.
inline AriResult adjusted_rand_index(const Contingency& ct) {
  if (ct.n < 2) throw Error(ErrorCode::InvalidParameter, "ARI needs at least two points");
  double sum_cells = 0.0;
  for (const auto& row : ct.table)
    for (auto v : row) sum_cells += choose2(static_cast<double>(v));
  double sum_rows = 0.0;
  for (auto v : ct.row_sums) sum_rows += choose2(static_cast<double>(v));
  double sum_cols = 0.0;
  for (auto v : ct.col_sums) sum_cols += choose2(static_cast<double>(v));
  const double expected = sum_rows * sum_cols / choose2(static_cast<double>(ct.n));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return {1.0, true};
  return {(sum_cells - expected) / denom, false};
}

inline AriResult adjusted_rand_index(const std::vector<int>& truth,
                                     const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch, "label vectors differ in length");
  return adjusted_rand_index(contingency(truth, predicted));
}

}  // namespace pkbd
