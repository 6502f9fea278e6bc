#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "pkbd/densities.hpp"
#include "pkbd/em.hpp"
#include "pkbd/errors.hpp"
#include "pkbd/random.hpp"
#include "pkbd/special.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd {

/// How the model-model term K(G, G) of the distance is evaluated.
///  AsPrinted:  sum_k pi_k K_{beta rho_k^2}(mu_k, mu_k)
///  FullCross:  sum_k sum_l pi_k pi_l K_{beta rho_k rho_l}(mu_k, mu_l)
/// The two agree when M = 1.
enum class DistanceVariant { AsPrinted, FullCross };

enum class ElbowRule { SamplingFloor, RelativeDrop, MaxSecondDifference };

inline constexpr double kDefaultBeta = 0.1;
inline constexpr double kDefaultDropTau = 0.1;
inline constexpr double kDropEpsilon = 1e-15;

struct ProfileEntry {
  int m;
  double distance;
  double loglik;
  double aic;
  double bic;
};

struct ElbowEstimate {
  int m;
  bool no_elbow;
};

struct DistanceProfile {
  double beta = kDefaultBeta;
  double sampling_floor = 0.0;
  std::vector<ProfileEntry> entries;
  int estimated_m = 1;
  bool no_elbow = false;
  ElbowRule rule = ElbowRule::SamplingFloor;
  // every rule's answer, reported alongside the primary one
  int sampling_floor_m = 1;
  int relative_drop_m = 1;
  int second_difference_m = 1;
};

/// Scale of the V-statistic's own bias, (K_beta(x,x) - 1/omega_d) / n: the
/// distance a correctly specified model is expected to leave behind.
inline double distance_sampling_floor(double beta, int d, std::size_t n) {
  const double diag = std::exp(log_poisson_kernel_diagonal(beta, d));
  return (diag - std::exp(-log_surface_area(d))) / static_cast<double>(n);
}

/// (1/n^2) sum_i sum_j K_beta(x_i, x_j) including the diagonal. Rows are split
/// into contiguous blocks; each block keeps its own compensated sum and the
/// blocks are reduced in order, so the result does not depend on `threads`
/// beyond rounding inside a block.
inline double kernel_mean(const Dataset& data, double beta, int threads = 1) {
  const std::size_t n = data.size();
  const int d = static_cast<int>(data.dim());
  const double lw = log_surface_area(d);
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<CompensatedSum> partial(blocks);

  auto do_block = [&](std::size_t b) {
    CompensatedSum acc;
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto xi = data.point(i);
      acc.add(std::exp(log_poisson_kernel_t(1.0, beta, d, lw)));
      for (std::size_t j = i + 1; j < n; ++j)
        acc.add(2.0 * std::exp(log_poisson_kernel_t(dot(xi, data.point(j)), beta, d, lw)));
    }
    partial[b] = acc;
  };

  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) do_block(b);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t b = t; b < blocks; b += workers) do_block(b);
      });
  }
  CompensatedSum total;
  for (const auto& p : partial) total.add(p);
  const double nn = static_cast<double>(n);
  return total.value() / (nn * nn);
}

/// Poisson-kernel quadratic distance D_{K_beta}(F_n, G) between the empirical
/// distribution of `data` and a fitted PKBD mixture, using the closed-form
/// convolution K_a * K_b = K_{ab} for the cross terms.
inline double quadratic_distance(const Dataset& data, const MixtureModel& model, double beta,
                                 DistanceVariant variant = DistanceVariant::FullCross,
                                 int threads = 1) {
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::InvalidParameter, "beta must be in (0,1)");
  if (model.has_noise)
    throw Error(ErrorCode::NoiseComponentUnsupported, "distance is defined for pure PKBD mixtures");
  if (data.dim() != model.d) throw Error(ErrorCode::DimensionMismatch, "data and model differ");
  const int d = static_cast<int>(model.d);
  const double lw = log_surface_area(d);
  const std::size_t n = data.size();
  const std::size_t m = model.num_components();

  const double empirical = kernel_mean(data, beta, threads);

  CompensatedSum cross;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& c = model.components[k];
    const double g = beta * c.rho();
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i)
      s.add(std::exp(log_poisson_kernel_t(dot(data.point(i), c.mu().coords()), g, d, lw)));
    cross.add(model.weights[k] * s.value());
  }

  CompensatedSum model_term;
  if (variant == DistanceVariant::AsPrinted) {
    for (std::size_t k = 0; k < m; ++k) {
      const double r = model.components[k].rho();
      model_term.add(model.weights[k] * std::exp(log_poisson_kernel_diagonal(beta * r * r, d)));
    }
  } else {
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t l = 0; l < m; ++l) {
        const auto& a = model.components[k];
        const auto& b = model.components[l];
        const double g = beta * a.rho() * b.rho();
        const double kv = k == l ? std::exp(log_poisson_kernel_diagonal(g, d))
                                 : std::exp(log_poisson_kernel_t(dot(a.mu(), b.mu()), g, d, lw));
        model_term.add(model.weights[k] * model.weights[l] * kv);
      }
  }
  return empirical - 2.0 * cross.value() / static_cast<double>(n) + model_term.value();
}

/// First-elbow estimate of the number of clusters from a distance profile.
///  SamplingFloor: smallest M that no larger M improves on by more than
///    `floor` (see distance_sampling_floor).
///  RelativeDrop: smallest M with (D_M - D_{M+1}) / max(D_M, eps) < tau; the
///    last M with no_elbow set when no such M exists.
///  MaxSecondDifference: interior M maximizing D_{M-1} - 2 D_M + D_{M+1}.
inline ElbowEstimate estimate_k(const std::vector<ProfileEntry>& entries, ElbowRule rule,
                                double tau = kDefaultDropTau, double floor = 0.0) {
  if (entries.size() < 3)
    throw Error(ErrorCode::TooFewEntries, "elbow estimation needs at least 3 profile entries");
  if (rule == ElbowRule::SamplingFloor) {
    if (!(floor > 0.0)) throw Error(ErrorCode::InvalidParameter, "sampling floor must be > 0");
    std::vector<double> tail_min(entries.size());
    tail_min.back() = entries.back().distance;
    for (std::size_t i = entries.size() - 1; i-- > 0;)
      tail_min[i] = std::min(entries[i].distance, tail_min[i + 1]);
    for (std::size_t i = 0; i + 1 < entries.size(); ++i)
      if (entries[i].distance - tail_min[i + 1] < floor) return {entries[i].m, false};
    return {entries.back().m, true};
  }
  if (rule == ElbowRule::RelativeDrop) {
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
      const double dm = entries[i].distance;
      const double drop = (dm - entries[i + 1].distance) / std::max(dm, kDropEpsilon);
      if (drop < tau) return {entries[i].m, false};
    }
    return {entries.back().m, true};
  }
  std::size_t best = 1;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < entries.size(); ++i) {
    const double v = entries[i - 1].distance - 2.0 * entries[i].distance + entries[i + 1].distance;
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return {entries[best].m, false};
}

/// Fits M = 1..m_max (no noise term) and records the distance and
/// log-likelihood of each fit, then applies the elbow rule.
inline DistanceProfile distance_profile(const Dataset& data, int m_max, double beta,
                                        const FitConfig& fit_config,
                                        DistanceVariant variant = DistanceVariant::FullCross,
                                        ElbowRule rule = ElbowRule::SamplingFloor,
                                        double tau = kDefaultDropTau) {
  if (m_max < 2) throw Error(ErrorCode::InvalidParameter, "m_max must be >= 2");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::InvalidParameter, "beta must be in (0,1)");
  DistanceProfile profile;
  profile.beta = beta;
  profile.rule = rule;
  profile.sampling_floor =
      distance_sampling_floor(beta, static_cast<int>(data.dim()), data.size());
  const Rng root(fit_config.seed);
  const int top = std::min<int>(m_max, static_cast<int>(data.size()));
  for (int m = 1; m <= top; ++m) {
    FitConfig cfg = fit_config;
    cfg.seed = root.split(static_cast<std::uint64_t>(m)).seed();
    const FitResult fitted = fit(data, static_cast<std::size_t>(m), false, cfg);
    const auto ic = information_criteria(fitted.loglik(), data.size(), static_cast<std::size_t>(m),
                                         data.dim());
    profile.entries.push_back({m, quadratic_distance(data, fitted.model, beta, variant,
                                                     fit_config.threads),
                               fitted.loglik(), ic.aic, ic.bic});
  }
  if (profile.entries.size() >= 3) {
    const auto est = estimate_k(profile.entries, rule, tau, profile.sampling_floor);
    profile.estimated_m = est.m;
    profile.no_elbow = est.no_elbow;
    profile.sampling_floor_m =
        estimate_k(profile.entries, ElbowRule::SamplingFloor, tau, profile.sampling_floor).m;
    profile.relative_drop_m = estimate_k(profile.entries, ElbowRule::RelativeDrop, tau).m;
    profile.second_difference_m = estimate_k(profile.entries, ElbowRule::MaxSecondDifference).m;
  } else {
    profile.estimated_m = profile.entries.back().m;
    profile.no_elbow = true;
    profile.sampling_floor_m = profile.relative_drop_m = profile.second_difference_m =
        profile.estimated_m;
  }
  return profile;
}

}  // namespace pkbd
