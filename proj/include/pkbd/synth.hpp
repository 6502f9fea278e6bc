#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pkbd/densities.hpp"
#include "pkbd/errors.hpp"
#include "pkbd/random.hpp"
#include "pkbd/samplers.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd {

enum class ComponentKind { Pkbd, Vmf, Uniform };

struct ComponentSpec {
  ComponentKind kind = ComponentKind::Uniform;
  double weight = 1.0;
  std::optional<UnitVector> mu;  // absent for uniform
  double concentration = 0.0;    // rho for PKBD, kappa for vMF

  static ComponentSpec uniform(double weight) { return {ComponentKind::Uniform, weight, {}, 0.0}; }
  static ComponentSpec pkbd(double weight, UnitVector mu, double rho) {
    return {ComponentKind::Pkbd, weight, std::move(mu), rho};
  }
  static ComponentSpec vmf(double weight, UnitVector mu, double kappa) {
    return {ComponentKind::Vmf, weight, std::move(mu), kappa};
  }
};

inline void validate_mixture_spec(const std::vector<ComponentSpec>& spec, int d) {
  if (spec.empty()) throw Error(ErrorCode::InvalidParameter, "mixture spec is empty");
  double total = 0.0;
  for (const auto& c : spec) {
    if (!(c.weight > 0.0)) throw Error(ErrorCode::InvalidParameter, "component weights must be > 0");
    total += c.weight;
    if (c.kind != ComponentKind::Uniform) {
      if (!c.mu) throw Error(ErrorCode::InvalidParameter, "non-uniform component needs mu");
      if (static_cast<int>(c.mu->dim()) != d)
        throw Error(ErrorCode::DimensionMismatch, "component mu has the wrong dimension");
    }
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidParameter, "component weights sum to " + std::to_string(total));
}

/// Labeled draw from a mixture: memberships are categorical by weight and the
/// label of each point is the index of its generating component.
inline Dataset sample_mixture(const std::vector<ComponentSpec>& spec, std::size_t n, int d,
                              Rng& rng) {
  validate_mixture_spec(spec, d);
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "n must be >= 1");
  std::vector<double> cdf;
  double acc = 0.0;
  for (const auto& c : spec) cdf.push_back(acc += c.weight);
  std::vector<int> labels(n);
  std::vector<std::size_t> counts(spec.size(), 0);
  for (auto& l : labels) {
    const double u = rng.uniform() * acc;
    std::size_t k = 0;
    while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
    l = static_cast<int>(k);
    ++counts[k];
  }
  std::vector<std::vector<UnitVector>> draws(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    if (counts[k] == 0) continue;
    const auto& c = spec[k];
    Rng sub = rng.split(k);
    switch (c.kind) {
      case ComponentKind::Uniform: draws[k] = sample_uniform(d, counts[k], sub).points; break;
      case ComponentKind::Vmf:
        draws[k] = sample_vmf({*c.mu, c.concentration}, counts[k], sub).points;
        break;
      case ComponentKind::Pkbd:
        draws[k] = sample_pkbd(PkbdComponent(*c.mu, c.concentration), counts[k], sub).points;
        break;
    }
  }
  std::vector<std::size_t> next(spec.size(), 0);
  std::vector<double> flat;
  flat.reserve(n * static_cast<std::size_t>(d));
  for (int l : labels) {
    const auto& p = draws[static_cast<std::size_t>(l)][next[static_cast<std::size_t>(l)]++];
    flat.insert(flat.end(), p.vec().begin(), p.vec().end());
  }
  return Dataset(static_cast<std::size_t>(d), std::move(flat), std::move(labels));
}

/// mu_1 = (1,0,0), mu_2 = (a, 0, sqrt(1-a^2)), so mu_1.mu_2 = a.
inline std::pair<UnitVector, UnitVector> centroids_pair(double a) {
  if (!(a >= -1.0 && a <= 1.0)) throw Error(ErrorCode::InvalidParameter, "a must be in [-1,1]");
  return {UnitVector{1.0, 0.0, 0.0}, normalize(std::vector<double>{a, 0.0, std::sqrt(1.0 - a * a)})};
}

/// Normalized (1/a, 0, 1), (-1/(2a), sqrt(3)/(2a), 1), (-1/(2a), -sqrt(3)/(2a), 1):
/// every pair has cosine (2a^2 - 1) / (2 (a^2 + 1)).
inline std::array<UnitVector, 3> centroids_triple(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::InvalidParameter, "a must be > 0");
  const double s3 = std::sqrt(3.0);
  return {normalize(std::vector<double>{1.0 / a, 0.0, 1.0}),
          normalize(std::vector<double>{-0.5 / a, 0.5 * s3 / a, 1.0}),
          normalize(std::vector<double>{-0.5 / a, -0.5 * s3 / a, 1.0})};
}

/// Pairwise cosine of centroids_triple(a).
inline double triple_cosine(double a) { return (2.0 * a * a - 1.0) / (2.0 * (a * a + 1.0)); }

/// Inverse of triple_cosine for c in (-1/2, 1).
inline double triple_parameter_for_cosine(double c) {
  if (!(c > -0.5 && c < 1.0)) throw Error(ErrorCode::InvalidParameter, "cosine must be in (-1/2, 1)");
  return std::sqrt((1.0 + 2.0 * c) / (2.0 - 2.0 * c));
}

/// LDA corpus design. Topic-word rows are drawn from
/// Dirichlet(word_concentration * word_prior); word_prior is the mean row
/// (uniform 1/v by default).
struct LdaSpec {
  int k_topics = 3;
  int vocab_size = 50;
  double avg_doc_size = 200.0;
  int n_docs = 100;
  std::vector<double> dirichlet_alpha;  // empty means 1/k each
  std::vector<double> word_prior;       // empty means 1/v each
  double word_concentration = 0.0;      // <= 0 means kDefaultWordConcentrationPerWord * v

  static constexpr double kDefaultWordConcentrationPerWord = 10.0;

  std::vector<double> alpha() const {
    return dirichlet_alpha.empty() ? std::vector<double>(static_cast<std::size_t>(k_topics), 1.0 / k_topics)
                                   : dirichlet_alpha;
  }
  std::vector<double> prior() const {
    return word_prior.empty()
               ? std::vector<double>(static_cast<std::size_t>(vocab_size), 1.0 / vocab_size)
               : word_prior;
  }
  double concentration() const {
    return word_concentration > 0.0 ? word_concentration
                                    : kDefaultWordConcentrationPerWord * vocab_size;
  }

  void validate() const {
    if (k_topics < 1 || vocab_size < 2 || n_docs < 1 || !(avg_doc_size > 0.0))
      throw Error(ErrorCode::InvalidParameter, "LDA sizes must be positive (v >= 2)");
    const auto a = alpha();
    if (static_cast<int>(a.size()) != k_topics)
      throw Error(ErrorCode::InvalidParameter, "dirichlet_alpha length must equal k_topics");
    for (double x : a)
      if (!(x > 0.0)) throw Error(ErrorCode::InvalidParameter, "dirichlet_alpha must be positive");
    const auto p = prior();
    if (static_cast<int>(p.size()) != vocab_size)
      throw Error(ErrorCode::InvalidParameter, "word_prior length must equal vocab_size");
    for (double x : p)
      if (!(x > 0.0)) throw Error(ErrorCode::InvalidParameter, "word_prior must be positive");
  }
};

struct LdaCorpus {
  Dataset data;                        // unit-normalized term-count vectors, labels = argmax theta
  std::vector<std::vector<int>> counts;  // raw term counts per document
  std::vector<std::vector<double>> theta;
  double sparsity = 0.0;  // mean fraction of zero entries per document
};

inline std::vector<double> sample_dirichlet(const std::vector<double>& alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) total += out[i] = rng.gamma(alpha[i]);
  if (total <= 0.0) {
    // every gamma draw underflowed: fall back to a single random coordinate
    std::fill(out.begin(), out.end(), 0.0);
    out[rng.index(out.size())] = 1.0;
    return out;
  }
  for (auto& x : out) x /= total;
  return out;
}

inline std::size_t sample_categorical(const std::vector<double>& p, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    if (u < p[k]) return k;
    u -= p[k];
  }
  return p.size() - 1;
}

/// Generates documents with N ~ Poisson(xi) (zero redrawn), theta ~ Dir(alpha),
/// per-word topic z ~ Cat(theta) and word ~ Cat(B_z).
inline LdaCorpus lda_corpus(const LdaSpec& spec, Rng& rng) {
  spec.validate();
  const auto alpha = spec.alpha();
  auto lambda = spec.prior();
  const double conc = spec.concentration();
  for (auto& x : lambda) x *= conc;
  const auto k = static_cast<std::size_t>(spec.k_topics);
  const auto v = static_cast<std::size_t>(spec.vocab_size);

  std::vector<std::vector<double>> topics(k);
  for (auto& row : topics) row = sample_dirichlet(lambda, rng);

  LdaCorpus corpus;
  std::vector<double> flat;
  std::vector<int> labels;
  double zero_total = 0.0;
  for (int doc = 0; doc < spec.n_docs; ++doc) {
    long len = 0;
    while (len == 0) len = rng.poisson(spec.avg_doc_size);
    auto theta = sample_dirichlet(alpha, rng);
    std::vector<int> counts(v, 0);
    for (long w = 0; w < len; ++w) {
      const std::size_t z = sample_categorical(theta, rng);
      ++counts[sample_categorical(topics[z], rng)];
    }
    std::size_t zeros = 0;
    std::vector<double> row(v);
    for (std::size_t j = 0; j < v; ++j) {
      row[j] = counts[j];
      if (counts[j] == 0) ++zeros;
    }
    zero_total += static_cast<double>(zeros) / static_cast<double>(v);
    const auto u = normalize(row);
    flat.insert(flat.end(), u.vec().begin(), u.vec().end());
    labels.push_back(static_cast<int>(std::max_element(theta.begin(), theta.end()) - theta.begin()));
    corpus.counts.push_back(std::move(counts));
    corpus.theta.push_back(std::move(theta));
  }
  corpus.sparsity = zero_total / spec.n_docs;
  corpus.data = Dataset(v, std::move(flat), std::move(labels));
  return corpus;
}

}  // namespace pkbd
