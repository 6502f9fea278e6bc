#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "pkbd/errors.hpp"
#include "pkbd/special.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd {

inline constexpr double kRhoMin = 1e-8;
inline constexpr double kRhoMax = 1.0 - 1e-8;

/// Poisson kernel-based component PKBD(mu, rho). rho is clamped into
/// [1e-8, 1 - 1e-8]; clamped() reports whether that happened.
class PkbdComponent {
 public:
  PkbdComponent() = default;
  PkbdComponent(UnitVector mu, double rho) : mu_(std::move(mu)) { set_rho(rho); }

  const UnitVector& mu() const noexcept { return mu_; }
  double rho() const noexcept { return rho_; }
  bool clamped() const noexcept { return clamped_; }
  std::size_t dim() const noexcept { return mu_.dim(); }

  void set_mu(UnitVector mu) { mu_ = std::move(mu); }
  void set_rho(double rho) {
    if (!std::isfinite(rho) || rho < 0.0 || rho > 1.0)
      throw Error(ErrorCode::InvalidParameter, "rho must lie in (0, 1), got " + std::to_string(rho));
    rho_ = std::clamp(rho, kRhoMin, kRhoMax);
    clamped_ = rho_ != rho;
  }

 private:
  UnitVector mu_;
  double rho_ = 0.5;
  bool clamped_ = false;
};

/// von Mises-Fisher component vMF(mu, kappa); kappa = 0 is the uniform law.
struct VmfComponent {
  UnitVector mu;
  double kappa = 0.0;
};

/// Finite mixture of PKBD components plus an optional uniform noise term:
/// f(x) = noise_weight / omega_d + sum_j weights[j] f_j(x).
struct MixtureModel {
  std::size_t d = 0;
  std::vector<PkbdComponent> components;
  std::vector<double> weights;
  double noise_weight = 0.0;
  bool has_noise = false;

  std::size_t num_components() const noexcept { return components.size(); }

  void validate() const {
    if (components.empty())
      throw Error(ErrorCode::InvalidParameter, "mixture needs at least one component");
    if (weights.size() != components.size())
      throw Error(ErrorCode::LengthMismatch, "one weight per component required");
    double total = has_noise ? noise_weight : 0.0;
    if (!has_noise && noise_weight != 0.0)
      throw Error(ErrorCode::InvalidParameter, "noise weight set without a noise component");
    if (noise_weight < 0.0) throw Error(ErrorCode::InvalidParameter, "negative noise weight");
    for (std::size_t k = 0; k < components.size(); ++k) {
      if (components[k].dim() != d)
        throw Error(ErrorCode::DimensionMismatch, "component dimension differs from model d");
      if (!(weights[k] >= 0.0)) throw Error(ErrorCode::InvalidParameter, "negative weight");
      total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidParameter, "weights sum to " + std::to_string(total));
  }
};

/// log of the Poisson kernel (1 - g^2) / (omega_d (1 + g^2 - 2 g t)^{d/2}) given
/// t = x.y and log omega_d.
inline double log_poisson_kernel_t(double t, double gamma, int d, double log_omega) {
  if (gamma == 0.0) return -log_omega;
  const double base = std::max(1.0 + gamma * gamma - 2.0 * gamma * t,
                               (1.0 - gamma) * (1.0 - gamma));
  return std::log1p(-gamma * gamma) - log_omega - 0.5 * d * std::log(base);
}

/// |gamma x - y|^2 written as (1 - g)^2 + g |x - y|^2, which keeps full relative
/// precision when x is close to y and gamma is close to 1.
inline double kernel_base(std::span<const double> x, std::span<const double> y, double gamma) {
  double dist2 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double e = x[j] - y[j];
    dist2 += e * e;
  }
  return (1.0 - gamma) * (1.0 - gamma) + gamma * dist2;
}

/// Same kernel as log_poisson_kernel_t, from the base computed by kernel_base.
inline double log_poisson_kernel_base(double base, double gamma, int d, double log_omega) {
  if (gamma == 0.0) return -log_omega;
  return std::log1p(-gamma * gamma) - log_omega - 0.5 * d * std::log(base);
}

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw Error(ErrorCode::InvalidParameter, "kernel parameter must lie in [0, 1)");
}

/// K_gamma(x, y) = P_d(gamma x, y).
inline double poisson_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  check_gamma(gamma);
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "kernel arguments differ in dimension");
  const int d = static_cast<int>(x.size());
  return std::exp(log_poisson_kernel_base(kernel_base(x, y, gamma), gamma, d, log_surface_area(d)));
}

inline double poisson_kernel(const UnitVector& x, const UnitVector& y, double gamma) {
  return poisson_kernel(x.coords(), y.coords(), gamma);
}

/// K_gamma(x, x) = (1 + gamma) / (omega_d (1 - gamma)^{d-1}), evaluated in log space.
inline double log_poisson_kernel_diagonal(double gamma, int d) {
  check_gamma(gamma);
  return std::log1p(gamma) - log_surface_area(d) - (d - 1) * std::log1p(-gamma);
}

inline double pkbd_log_density(std::span<const double> x, const PkbdComponent& c) {
  if (x.size() != c.dim())
    throw Error(ErrorCode::DimensionMismatch, "point and component dimensions differ");
  const int d = static_cast<int>(x.size());
  return log_poisson_kernel_base(kernel_base(x, c.mu().coords(), c.rho()), c.rho(), d,
                                 log_surface_area(d));
}

inline double pkbd_log_density(const UnitVector& x, const PkbdComponent& c) {
  return pkbd_log_density(x.coords(), c);
}

struct DensityBounds {
  double lower;
  double upper;
};

/// Strict bounds (1-rho)/(omega_d (1+rho)^{d-1}) < f < (1+rho)/(omega_d (1-rho)^{d-1}).
inline DensityBounds pkbd_density_bounds(double rho, int d) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidParameter, "rho must be in (0,1)");
  if (d < 2) throw Error(ErrorCode::InvalidParameter, "d must be >= 2");
  const double lw = log_surface_area(d);
  return {std::exp(std::log1p(-rho) - lw - (d - 1) * std::log1p(rho)),
          std::exp(std::log1p(rho) - lw - (d - 1) * std::log1p(-rho))};
}

inline double vmf_log_density(std::span<const double> x, const VmfComponent& c) {
  if (x.size() != c.mu.dim())
    throw Error(ErrorCode::DimensionMismatch, "point and component dimensions differ");
  if (!(c.kappa >= 0.0)) throw Error(ErrorCode::InvalidParameter, "kappa must be >= 0");
  const int d = static_cast<int>(x.size());
  if (c.kappa == 0.0) return -log_surface_area(d);
  return log_vmf_normalizer(d, c.kappa) + c.kappa * dot(x, c.mu.coords());
}

inline double vmf_log_density(const UnitVector& x, const VmfComponent& c) {
  return vmf_log_density(x.coords(), c);
}

/// Fills out[k] with log(weight_k) + log f_k(x) for every component, and the
/// noise term log(alpha_0) - log omega_d in the last slot when present.
inline void mixture_log_terms(std::span<const double> x, const MixtureModel& model,
                              double log_omega, std::vector<double>& out) {
  const std::size_t m = model.num_components();
  out.resize(m + (model.has_noise ? 1 : 0));
  const int d = static_cast<int>(model.d);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& c = model.components[k];
    out[k] = std::log(model.weights[k]) +
             log_poisson_kernel_base(kernel_base(x, c.mu().coords(), c.rho()), c.rho(), d, log_omega);
  }
  if (model.has_noise) out[m] = std::log(model.noise_weight) - log_omega;
}

inline double mixture_log_density(std::span<const double> x, const MixtureModel& model) {
  if (x.size() != model.d)
    throw Error(ErrorCode::DimensionMismatch, "point and model dimensions differ");
  std::vector<double> terms;
  mixture_log_terms(x, model, log_surface_area(static_cast<int>(model.d)), terms);
  return log_sum_exp(terms);
}

inline double mixture_log_density(const UnitVector& x, const MixtureModel& model) {
  return mixture_log_density(x.coords(), model);
}

}  // namespace pkbd
