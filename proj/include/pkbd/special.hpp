#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "pkbd/errors.hpp"

namespace pkbd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  void add(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// log I_nu(x) for nu >= 0, x >= 0, where I_nu is the modified Bessel function
/// of the first kind.
///
/// The power series sum_m (x/2)^{2m+nu} / (m! Gamma(m+nu+1)) has only positive
/// terms, so it is summed outward from its largest term in log space. This
/// keeps full relative precision for small arguments and avoids the overflow
/// of I_nu itself for large ones; the number of terms visited grows like
/// sqrt(x).
inline double log_bessel_i(double nu, double x) {
  if (nu < 0.0 || x < 0.0 || !std::isfinite(nu) || !std::isfinite(x))
    throw Error(ErrorCode::InvalidParameter, "log_bessel_i needs nu >= 0 and finite x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : kNegInf;

  const double half = 0.5 * x;
  const double log_half = std::log(half);
  const double q = half * half;
  auto log_term = [&](double m) {
    return (2.0 * m + nu) * log_half - std::lgamma(m + 1.0) - std::lgamma(m + nu + 1.0);
  };

  // term ratio t_{m+1}/t_m = q / ((m+1)(m+nu+1)) crosses 1 near this m.
  const double peak = std::max(0.0, std::floor(0.5 * (-nu + std::sqrt(nu * nu + x * x))));
  const double log_peak = log_term(peak);

  constexpr double kRelTol = 1e-17;
  double sum = 1.0;
  double t = 1.0;
  for (double m = peak; ; m += 1.0) {
    t *= q / ((m + 1.0) * (m + nu + 1.0));
    sum += t;
    if (t < kRelTol * sum) break;
  }
  t = 1.0;
  for (double m = peak; m > 0.0; m -= 1.0) {
    t *= (m * (m + nu)) / q;
    sum += t;
    if (t < kRelTol * sum) break;
  }
  return log_peak + std::log(sum);
}

/// log of the vMF normalizing constant
/// c_d(kappa) = kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa)), kappa > 0.
inline double log_vmf_normalizer(int d, double kappa) {
  const double nu = 0.5 * d - 1.0;
  return nu * std::log(kappa) - 0.5 * d * std::log(2.0 * std::numbers::pi) -
         log_bessel_i(nu, kappa);
}

}  // namespace pkbd
