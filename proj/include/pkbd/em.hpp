#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pkbd/densities.hpp"
#include "pkbd/errors.hpp"
#include "pkbd/random.hpp"
#include "pkbd/special.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd {

/// Hard label given to points whose largest posterior is the uniform noise term.
inline constexpr int kNoiseLabel = -1;

enum class StopRule { LoglikDelta, MembershipStable, MaxIter };

struct FitConfig {
  int num_restarts = 10;
  int max_iterations = 500;
  double loglik_tolerance = 1e-6;  // relative change
  StopRule stop_rule = StopRule::LoglikDelta;
  double rho_init = 0.5;
  int newton_steps_per_mstep = 1;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (num_restarts < 1) throw Error(ErrorCode::InvalidParameter, "num_restarts must be >= 1");
    if (max_iterations < 1) throw Error(ErrorCode::InvalidParameter, "max_iterations must be >= 1");
    if (!(loglik_tolerance > 0.0))
      throw Error(ErrorCode::InvalidParameter, "loglik_tolerance must be > 0");
    if (!(rho_init > 0.0 && rho_init < 1.0))
      throw Error(ErrorCode::InvalidParameter, "rho_init must be in (0,1)");
    if (newton_steps_per_mstep < 1)
      throw Error(ErrorCode::InvalidParameter, "newton_steps_per_mstep must be >= 1");
  }
};

/// Posteriors p(k | x_i) for every column (components, then noise) and the
/// reweighting factors w_ik = p(k | x_i) / (1 + rho_k^2 - 2 rho_k x_i.mu_k).
struct EStepState {
  std::size_t n = 0;
  std::size_t num_components = 0;
  std::size_t cols = 0;  // num_components + 1 when the noise term is present
  std::vector<double> posteriors;  // n x cols
  std::vector<double> weights_w;   // n x num_components
  std::vector<double> point_log_density;
  double loglik = 0.0;

  double posterior(std::size_t i, std::size_t k) const { return posteriors[i * cols + k]; }
  double w(std::size_t i, std::size_t k) const { return weights_w[i * num_components + k]; }
};

struct FitResult {
  MixtureModel model;
  std::vector<double> posteriors;  // n x cols, consistent with `model`
  std::size_t cols = 0;
  std::vector<int> assignments;
  std::vector<double> loglik_trace;  // [0] is the initial model
  int iterations = 0;
  int restart_index = 0;
  int reseeds = 0;
  bool converged = false;

  double loglik() const { return loglik_trace.back(); }
};

struct InformationCriteria {
  double num_params;
  double aic;
  double bic;
};

/// AIC/BIC with M d + M - 1 free parameters (plus one for the noise weight).
inline InformationCriteria information_criteria(double loglik, std::size_t n, std::size_t m,
                                                std::size_t d, bool with_noise = false) {
  const double p = static_cast<double>(m * d + m - 1 + (with_noise ? 1 : 0));
  return {p, 2.0 * p - 2.0 * loglik, std::log(static_cast<double>(n)) * p - 2.0 * loglik};
}

inline double log_likelihood(const Dataset& data, const MixtureModel& model) {
  if (data.dim() != model.d) throw Error(ErrorCode::DimensionMismatch, "data and model differ");
  const double lw = log_surface_area(static_cast<int>(model.d));
  std::vector<double> terms;
  CompensatedSum total;
  for (std::size_t i = 0; i < data.size(); ++i) {
    mixture_log_terms(data.point(i), model, lw, terms);
    total.add(log_sum_exp(terms));
  }
  return total.value();
}

/// Random-start initialization: M distinct data points as centroids, common
/// rho_init, equal weights (shared with the noise term when enabled).
inline MixtureModel init_params(const Dataset& data, std::size_t m, bool with_noise,
                                const FitConfig& config, Rng& rng) {
  const std::size_t n = data.size();
  if (m < 1) throw Error(ErrorCode::InvalidParameter, "need at least one cluster");
  if (m > n)
    throw Error(ErrorCode::TooManyClusters,
                std::to_string(m) + " clusters for " + std::to_string(n) + " points");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < m; ++k) std::swap(idx[k], idx[k + rng.index(n - k)]);

  MixtureModel model;
  model.d = data.dim();
  model.has_noise = with_noise;
  const double share = 1.0 / static_cast<double>(m + (with_noise ? 1 : 0));
  for (std::size_t k = 0; k < m; ++k) {
    model.components.emplace_back(data.unit(idx[k]), config.rho_init);
    model.weights.push_back(share);
  }
  model.noise_weight = with_noise ? share : 0.0;
  return model;
}

inline EStepState e_step(const Dataset& data, const MixtureModel& model) {
  if (data.dim() != model.d) throw Error(ErrorCode::DimensionMismatch, "data and model differ");
  const std::size_t n = data.size();
  const std::size_t m = model.num_components();
  EStepState s;
  s.n = n;
  s.num_components = m;
  s.cols = m + (model.has_noise ? 1 : 0);
  s.posteriors.resize(n * s.cols);
  s.weights_w.resize(n * m);
  s.point_log_density.resize(n);
  const double lw = log_surface_area(static_cast<int>(model.d));
  std::vector<double> terms;
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.point(i);
    mixture_log_terms(x, model, lw, terms);
    const double lse = log_sum_exp(terms);
    s.point_log_density[i] = lse;
    total.add(lse);
    double row = 0.0;
    for (std::size_t k = 0; k < s.cols; ++k) {
      const double p = std::exp(terms[k] - lse);
      s.posteriors[i * s.cols + k] = p;
      row += p;
    }
    for (std::size_t k = 0; k < s.cols; ++k) s.posteriors[i * s.cols + k] /= row;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& c = model.components[k];
      s.weights_w[i * m + k] = s.posteriors[i * s.cols + k] / kernel_base(x, c.mu().coords(), c.rho());
    }
  }
  s.loglik = total.value();
  return s;
}

/// Column means of the posterior matrix (noise column last when present).
inline std::vector<double> m_step_weights(const EStepState& state) {
  std::vector<CompensatedSum> acc(state.cols);
  for (std::size_t i = 0; i < state.n; ++i)
    for (std::size_t k = 0; k < state.cols; ++k) acc[k].add(state.posterior(i, k));
  std::vector<double> alpha(state.cols);
  double total = 0.0;
  for (std::size_t k = 0; k < state.cols; ++k) {
    alpha[k] = acc[k].value() / static_cast<double>(state.n);
    total += alpha[k];
  }
  for (auto& a : alpha) a /= total;
  return alpha;
}

/// Sum_i w_ik x_i.
inline std::vector<double> weighted_resultant(const Dataset& data, const EStepState& state,
                                              std::size_t k) {
  std::vector<double> r(data.dim(), 0.0);
  for (std::size_t i = 0; i < state.n; ++i) {
    const double w = state.w(i, k);
    const auto x = data.point(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += w * x[j];
  }
  return r;
}

inline UnitVector m_step_mu(const Dataset& data, const EStepState& state, std::size_t k) {
  const auto r = weighted_resultant(data, state, k);
  if (!(norm(r) > kZeroNorm))
    throw Error(ErrorCode::DegenerateResultant, "component " + std::to_string(k) + " collapsed");
  return normalize(r);
}

/// Sufficient statistics of the concentration update for one component.
struct RhoStats {
  double alpha_n;         // n * alpha_k
  double sum_w;           // sum_i w_ik
  double resultant_norm;  // |sum_i w_ik x_i|
};

/// g(y) = -2 n a y / (1 - y^2) + d |R| - d y S, the derivative in rho of the
/// surrogate maximized by the M-step; g(0) > 0 and g(1-) < 0.
inline double rho_score(const RhoStats& s, int d, double y) {
  return -2.0 * s.alpha_n * y / (1.0 - y * y) + d * s.resultant_norm - d * y * s.sum_w;
}

/// g'(y) = -2 n a (1 + y^2) / (1 - y^2)^2 - d S, always negative.
inline double rho_score_derivative(const RhoStats& s, int d, double y) {
  const double q = 1.0 - y * y;
  return -2.0 * s.alpha_n * (1.0 + y * y) / (q * q) - d * s.sum_w;
}

/// Surrogate objective whose y-derivative is rho_score (constants dropped).
inline double rho_surrogate(const RhoStats& s, int d, double y) {
  return s.alpha_n * std::log1p(-y * y) - 0.5 * d * s.sum_w * y * y + d * y * s.resultant_norm;
}

/// Applies `steps` Newton iterations rho <- rho - g/g'. A step leaving
/// (1e-8, 1-1e-8) is replaced by a bisection step towards the root, and a
/// step that lowers the surrogate is halved back towards the previous value.
inline double rho_update(const RhoStats& stats, int d, double rho_prev, int steps) {
  if (!(rho_prev > 0.0 && rho_prev < 1.0))
    throw Error(ErrorCode::InvalidParameter, "rho_prev must be in (0,1)");
  double rho = std::clamp(rho_prev, kRhoMin, kRhoMax);
  for (int s = 0; s < steps; ++s) {
    const double g = rho_score(stats, d, rho);
    const double gp = rho_score_derivative(stats, d, rho);
    if (!std::isfinite(g) || !std::isfinite(gp))
      throw Error(ErrorCode::NonFiniteUpdate, "non-finite rho score");
    if (g == 0.0) break;
    double next = rho - g / gp;
    if (!(next > kRhoMin && next < kRhoMax)) next = g > 0.0 ? 0.5 * (rho + kRhoMax) : 0.5 * (rho + kRhoMin);
    const double base = rho_surrogate(stats, d, rho);
    for (int h = 0; h < 60 && rho_surrogate(stats, d, next) < base; ++h) next = 0.5 * (next + rho);
    if (next == rho) break;
    rho = next;
  }
  return std::clamp(rho, kRhoMin, kRhoMax);
}

namespace detail {

inline std::vector<int> hard_assignments(const EStepState& s) {
  std::vector<int> out(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.cols; ++k)
      if (s.posterior(i, k) > s.posterior(i, best)) best = k;
    out[i] = best == s.num_components ? kNoiseLabel : static_cast<int>(best);
  }
  return out;
}

inline constexpr double kDegenerateWeight = 1e-8;
inline constexpr int kMaxReseeds = 50;

/// One M-step from the given E-step. Collapsed components are re-seeded at
/// the lowest-density points; returns how many were re-seeded.
inline int m_step(const Dataset& data, const EStepState& state, const FitConfig& config,
                  MixtureModel& model) {
  const std::size_t m = model.num_components();
  const int d = static_cast<int>(model.d);
  const auto alpha = m_step_weights(state);
  std::vector<std::size_t> collapsed;
  for (std::size_t k = 0; k < m; ++k) {
    model.weights[k] = alpha[k];
    const auto r = weighted_resultant(data, state, k);
    const double rn = norm(r);
    double sum_w = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) sum_w += state.w(i, k);
    if (alpha[k] < kDegenerateWeight || !(rn > kZeroNorm)) {
      collapsed.push_back(k);
      continue;
    }
    auto& c = model.components[k];
    const RhoStats stats{static_cast<double>(state.n) * alpha[k], sum_w, rn};
    c.set_rho(rho_update(stats, d, c.rho(), config.newton_steps_per_mstep));
    c.set_mu(normalize(r));
  }
  if (model.has_noise) model.noise_weight = alpha[m];

  if (!collapsed.empty()) {
    std::vector<std::size_t> order(state.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return state.point_log_density[a] < state.point_log_density[b];
    });
    const double share = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < collapsed.size(); ++j) {
      const std::size_t k = collapsed[j];
      model.components[k] = PkbdComponent(data.unit(order[j % state.n]), config.rho_init);
      model.weights[k] = share;
    }
    double total = model.noise_weight;
    for (double w : model.weights) total += w;
    for (double& w : model.weights) w /= total;
    model.noise_weight /= total;
  }
  return static_cast<int>(collapsed.size());
}

}  // namespace detail

/// Runs the EM iteration from a given starting model until the stop rule fires.
inline FitResult run_em(const Dataset& data, MixtureModel model, const FitConfig& config) {
  config.validate();
  model.validate();
  FitResult res;
  EStepState state = e_step(data, model);
  res.loglik_trace.push_back(state.loglik);
  std::vector<int> labels = detail::hard_assignments(state);
  for (int it = 1; it <= config.max_iterations; ++it) {
    res.reseeds += detail::m_step(data, state, config, model);
    state = e_step(data, model);
    res.iterations = it;
    const double prev = res.loglik_trace.back();
    res.loglik_trace.push_back(state.loglik);
    auto next_labels = detail::hard_assignments(state);
    bool stop = false;
    if (!std::isfinite(state.loglik) || res.reseeds > detail::kMaxReseeds) break;
    switch (config.stop_rule) {
      case StopRule::LoglikDelta:
        stop = std::abs(state.loglik - prev) <= config.loglik_tolerance * std::max(1.0, std::abs(prev));
        break;
      case StopRule::MembershipStable:
        stop = next_labels == labels;
        break;
      case StopRule::MaxIter:
        break;
    }
    labels = std::move(next_labels);
    if (stop) {
      res.converged = true;
      break;
    }
  }
  res.model = std::move(model);
  res.cols = state.cols;
  res.posteriors = std::move(state.posteriors);
  res.assignments = std::move(labels);
  return res;
}

/// Best of `num_restarts` random-start EM runs by final log-likelihood.
inline FitResult fit(const Dataset& data, std::size_t m, bool with_noise, const FitConfig& config) {
  config.validate();
  if (m > data.size())
    throw Error(ErrorCode::TooManyClusters,
                std::to_string(m) + " clusters for " + std::to_string(data.size()) + " points");
  if (m < 1) throw Error(ErrorCode::InvalidParameter, "need at least one cluster");
  const Rng root(config.seed);
  const auto restarts = static_cast<std::size_t>(config.num_restarts);
  std::vector<std::optional<FitResult>> runs(restarts);
  std::vector<std::exception_ptr> failures(restarts);

  auto run_one = [&](std::size_t r) {
    Rng rng = root.split(r);
    auto init = init_params(data, m, with_noise, config, rng);
    try {
      FitResult res = run_em(data, std::move(init), config);
      res.restart_index = static_cast<int>(r);
      if (std::isfinite(res.loglik()) && res.reseeds <= detail::kMaxReseeds) runs[r] = std::move(res);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteUpdate) failures[r] = std::current_exception();
    } catch (...) {
      failures[r] = std::current_exception();
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(1, config.threads));
  if (threads == 1 || restarts == 1) {
    for (std::size_t r = 0; r < restarts; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, restarts); ++t)
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < restarts; r = next++) run_one(r);
      });
  }

  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < restarts; ++r)
    if (runs[r] && (!best || runs[r]->loglik() > runs[*best]->loglik())) best = r;
  if (!best) throw Error(ErrorCode::AllRunsDegenerate, "every restart collapsed");
  return std::move(*runs[*best]);
}

}  // namespace pkbd
