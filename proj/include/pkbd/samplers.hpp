#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pkbd/densities.hpp"
#include "pkbd/errors.hpp"
#include "pkbd/random.hpp"
#include "pkbd/special.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd {

struct SampleBatch {
  std::vector<UnitVector> points;
  std::uint64_t proposals_used = 0;
  std::uint64_t seed = 0;

  double acceptance_rate() const {
    return proposals_used == 0 ? 0.0 : static_cast<double>(points.size()) / proposals_used;
  }
};

struct EnvelopeConstants {
  double kappa_rho;
  double m_rho;
  double efficiency;
  double log_m_rho;
};

enum class Envelope { Vmf, Uniform };

inline constexpr double kMinEfficiency = 1e-6;
inline constexpr std::uint64_t kProposalCapPerPoint = 10000;

namespace detail {

inline void check_rho_open(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidParameter, "rho must be in (0,1)");
}

inline void check_dim(int d) {
  if (d < 2) throw Error(ErrorCode::InvalidDimension, "d must be >= 2");
}

/// Uniform direction in dimension d written into out.
inline void uniform_direction(Rng& rng, std::size_t d, std::vector<double>& out) {
  out.resize(d);
  double s = 0.0;
  do {
    s = 0.0;
    for (auto& x : out) {
      x = rng.normal();
      s += x * x;
    }
  } while (s < 1e-300);
  const double inv = 1.0 / std::sqrt(s);
  for (auto& x : out) x *= inv;
}

/// Builds t*e_1 + sqrt(1-t^2)*v (v uniform on the sphere orthogonal to e_1)
/// and reflects e_1 onto mu with a Householder map.
inline std::vector<double> tangent_normal_point(Rng& rng, std::span<const double> mu, double t,
                                                std::vector<double>& scratch) {
  const std::size_t d = mu.size();
  uniform_direction(rng, d - 1, scratch);
  std::vector<double> x(d);
  const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
  x[0] = t;
  for (std::size_t i = 1; i < d; ++i) x[i] = s * scratch[i - 1];

  // u = e_1 - mu; H = I - 2 u u^T / |u|^2 maps e_1 to mu.
  std::vector<double> u(mu.begin(), mu.end());
  for (auto& v : u) v = -v;
  u[0] += 1.0;
  const double uu = squared_norm(u);
  if (uu > 1e-30) {
    const double coef = 2.0 * inner(u, x) / uu;
    for (std::size_t i = 0; i < d; ++i) x[i] -= coef * u[i];
  }
  const double n = norm(x);
  for (auto& v : x) v /= n;
  return x;
}

/// Wood (1994) rejection sampler for t = x.mu under vMF(kappa) in dimension d.
inline double vmf_cosine(Rng& rng, int d, double kappa) {
  const double dm1 = d - 1.0;
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  for (;;) {
    const double z = rng.beta(0.5 * dm1, 0.5 * dm1);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_pos();
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

}  // namespace detail

inline SampleBatch sample_uniform(int d, std::size_t n, Rng& rng) {
  detail::check_dim(d);
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "n must be >= 1");
  SampleBatch batch;
  batch.seed = rng.seed();
  batch.points.reserve(n);
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    detail::uniform_direction(rng, static_cast<std::size_t>(d), v);
    batch.points.emplace_back(normalize(v));
  }
  batch.proposals_used = n;
  return batch;
}

/// Draws vMF(mu, kappa) points via the tangent-normal decomposition.
inline SampleBatch sample_vmf(const VmfComponent& c, std::size_t n, Rng& rng) {
  const int d = static_cast<int>(c.mu.dim());
  if (!(c.kappa >= 0.0)) throw Error(ErrorCode::InvalidParameter, "kappa must be >= 0");
  if (c.kappa == 0.0) return sample_uniform(d, n, rng);
  SampleBatch batch;
  batch.seed = rng.seed();
  batch.points.reserve(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = detail::vmf_cosine(rng, d, c.kappa);
    batch.points.emplace_back(detail::tangent_normal_point(rng, c.mu.coords(), t, scratch));
  }
  batch.proposals_used = n;
  return batch;
}

/// CDF of the angle theta in [0, 2 pi) measured from the mode of a circular
/// PKBD (wrapped Cauchy). The atan2 form is continuous across theta = pi.
inline double pkbd_cdf_circle(double theta, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidParameter, "rho must be in (0,1)");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (theta <= 0.0) return 0.0;
  if (theta >= two_pi) return 1.0;
  const double h = 0.5 * theta;
  return std::atan2((1.0 + rho) * std::sin(h), (1.0 - rho) * std::cos(h)) / std::numbers::pi;
}

/// Closed-form inverse of pkbd_cdf_circle for u in [0, 1).
inline double pkbd_inverse_cdf_circle(double u, double rho) {
  const double a = std::numbers::pi * u;
  return 2.0 * std::atan2((1.0 - rho) * std::sin(a), (1.0 + rho) * std::cos(a));
}

/// Exact circular PKBD draws by inversion.
inline SampleBatch sample_pkbd_circle(const PkbdComponent& c, std::size_t n, Rng& rng) {
  if (c.dim() != 2) throw Error(ErrorCode::InvalidDimension, "circle sampler requires d = 2");
  const double phi = std::atan2(c.mu()[1], c.mu()[0]);
  SampleBatch batch;
  batch.seed = rng.seed();
  batch.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = phi + pkbd_inverse_cdf_circle(rng.uniform(), c.rho());
    batch.points.emplace_back(normalize(std::vector<double>{std::cos(angle), std::sin(angle)}));
  }
  batch.proposals_used = n;
  return batch;
}

/// vMF envelope for PKBD(rho) in dimension d: kappa_rho = d rho / (1 + rho^2)
/// and M_rho = (1+rho) / ((1-rho)^{d-1} c_d(kappa_rho) omega_d exp(kappa_rho)).
inline EnvelopeConstants envelope_constants(double rho, int d) {
  detail::check_rho_open(rho);
  if (d < 2) throw Error(ErrorCode::InvalidParameter, "d must be >= 2");
  const double kappa = d * rho / (1.0 + rho * rho);
  const double log_m = std::log1p(rho) - (d - 1) * std::log1p(-rho) -
                       log_vmf_normalizer(d, kappa) - log_surface_area(d) - kappa;
  return {kappa, std::exp(log_m), std::exp(-log_m), log_m};
}

inline double log_uniform_envelope_constant(double rho, int d) {
  detail::check_rho_open(rho);
  if (d < 2) throw Error(ErrorCode::InvalidParameter, "d must be >= 2");
  return std::log1p(rho) - (d - 1) * std::log1p(-rho);
}

/// M = (1+rho) / (1-rho)^{d-1} for a uniform proposal.
inline double uniform_envelope_constant(double rho, int d) {
  return std::exp(log_uniform_envelope_constant(rho, d));
}

/// Accept/reject sampler for PKBD(mu, rho) with a vMF(kappa_rho) or uniform
/// proposal. Runs until `n` points are accepted, or, when `max_proposals` is
/// nonzero, stops after exactly that many proposals (used to measure the
/// acceptance rate against 1/M).
inline SampleBatch sample_pkbd_rejection(const PkbdComponent& c, std::size_t n, Envelope envelope,
                                         Rng& rng, std::uint64_t max_proposals = 0) {
  const int d = static_cast<int>(c.dim());
  detail::check_dim(d);
  const double rho = c.rho();
  const double log_omega = log_surface_area(d);
  const auto& mu = c.mu().coords();

  double log_m = 0.0;
  double kappa = 0.0;
  double log_cd = 0.0;
  if (envelope == Envelope::Vmf) {
    const auto env = envelope_constants(rho, d);
    log_m = env.log_m_rho;
    kappa = env.kappa_rho;
    log_cd = log_vmf_normalizer(d, kappa);
  } else {
    log_m = log_uniform_envelope_constant(rho, d);
  }
  if (-log_m < std::log(kMinEfficiency))
    throw Error(ErrorCode::EfficiencyTooLow,
                "predicted efficiency " + std::to_string(std::exp(-log_m)) + " below 1e-6");

  const bool fixed_budget = max_proposals != 0;
  const std::uint64_t cap = fixed_budget ? max_proposals : kProposalCapPerPoint * n;

  SampleBatch batch;
  batch.seed = rng.seed();
  std::vector<double> scratch;
  std::vector<double> y;
  while (fixed_budget || batch.points.size() < n) {
    if (batch.proposals_used >= cap) {
      if (fixed_budget) break;
      throw Error(ErrorCode::EfficiencyTooLow, "proposal cap reached");
    }
    ++batch.proposals_used;
    double t;
    double log_g;
    if (envelope == Envelope::Vmf) {
      t = detail::vmf_cosine(rng, d, kappa);
      y = detail::tangent_normal_point(rng, mu, t, scratch);
      log_g = log_cd + kappa * t;
    } else {
      detail::uniform_direction(rng, static_cast<std::size_t>(d), y);
      t = dot(y, mu);
      log_g = -log_omega;
    }
    const double log_f = log_poisson_kernel_t(t, rho, d, log_omega);
    if (std::log(rng.uniform_pos()) <= log_f - log_m - log_g) batch.points.emplace_back(normalize(y));
  }
  return batch;
}

/// Inversion for d = 2, vMF-envelope rejection otherwise.
inline SampleBatch sample_pkbd(const PkbdComponent& c, std::size_t n, Rng& rng) {
  if (c.dim() == 2) return sample_pkbd_circle(c, n, rng);
  return sample_pkbd_rejection(c, n, Envelope::Vmf, rng);
}

}  // namespace pkbd
