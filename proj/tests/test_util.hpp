#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pkbd/random.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd::testutil {

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

/// Random orthogonal matrix (row-major d x d) by Gram-Schmidt on Gaussians.
inline std::vector<double> random_rotation(std::size_t d, Rng& rng) {
  std::vector<double> q(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (;;) {
      for (std::size_t c = 0; c < d; ++c) q[r * d + c] = rng.normal();
      for (std::size_t p = 0; p < r; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q[r * d + c] * q[p * d + c];
        for (std::size_t c = 0; c < d; ++c) q[r * d + c] -= s * q[p * d + c];
      }
      double nrm = 0.0;
      for (std::size_t c = 0; c < d; ++c) nrm += q[r * d + c] * q[r * d + c];
      nrm = std::sqrt(nrm);
      if (nrm < 1e-8) continue;
      for (std::size_t c = 0; c < d; ++c) q[r * d + c] /= nrm;
      break;
    }
  }
  return q;
}

inline UnitVector rotate(const std::vector<double>& q, std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<double> y(d, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) y[r] += q[r * d + c] * x[c];
  return normalize(y);
}

inline UnitVector random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  return normalize(v);
}

}  // namespace pkbd::testutil
