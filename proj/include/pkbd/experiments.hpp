#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "pkbd/em.hpp"
#include "pkbd/io.hpp"
#include "pkbd/metrics.hpp"
#include "pkbd/model_selection.hpp"
#include "pkbd/samplers.hpp"
#include "pkbd/synth.hpp"

namespace pkbd {

/// Numeric table with named columns, written as CSV.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(std::ostream& out) const {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
      out << '\n';
    }
  }
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Runs fn(0..n-1) on up to `threads` workers. Each index must only touch its
/// own output slot; the first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ReplicationStreams {
  Rng data;
  std::uint64_t fit_seed;
};

/// Independent data and fitting streams for replication `rep` of a run.
inline ReplicationStreams replication_streams(std::uint64_t seed, std::size_t rep) {
  const Rng r = Rng(seed).split(rep);
  return {r.split(0), r.split(1).seed()};
}

struct ClusteringScores {
  double ari = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
};

inline ClusteringScores score_clustering(const std::vector<int>& truth, const std::vector<int>& pred) {
  const auto ct = contingency(truth, pred);
  const auto pr = macro_precision_recall(ct);
  return {adjusted_rand_index(ct).value, pr.precision, pr.recall};
}

// ---- envelope efficiencies ----

struct EfficiencyRow {
  int d;
  double rho;
};

inline const std::vector<EfficiencyRow>& efficiency_grid() {
  static const std::vector<EfficiencyRow> grid = {{3, 0.1}, {3, 0.4},  {5, 0.1},  {5, 0.3}, {10, 0.1},
                                                  {10, 0.3}, {50, 0.1}, {50, 0.2}, {100, 0.1}};
  return grid;
}

inline ResultTable efficiency_table() {
  ResultTable t{{"d", "rho", "efficiency_vmf", "efficiency_uniform"}, {}};
  for (const auto& r : efficiency_grid())
    t.rows.push_back({static_cast<double>(r.d), r.rho, envelope_constants(r.rho, r.d).efficiency,
                      1.0 / uniform_envelope_constant(r.rho, r.d)});
  return t;
}

// ---- distance-profile study ----

struct ProfileStudyConfig {
  std::vector<double> rhos = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2};
  std::vector<double> betas = {0.1, 0.2, 0.5};
  int replications = 50;
  std::size_t n = 100;
  int m_max = 9;
  int true_m = 3;
  DistanceVariant variant = DistanceVariant::FullCross;
  FitConfig fit;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Per-replication output of the profile study: distance[b][m-1] for each
/// beta, fitted log-likelihood per M and the sampling-floor estimate per beta.
struct ProfileReplication {
  std::vector<std::vector<double>> distance;
  std::vector<double> loglik;
  std::vector<DistanceProfile> profiles;
};

/// Three equally weighted PKBD(rho) clusters at the canonical basis of S^2.
inline std::vector<ComponentSpec> three_axis_mixture(double rho) {
  return {ComponentSpec::pkbd(1.0 / 3, UnitVector::basis(3, 0), rho),
          ComponentSpec::pkbd(1.0 / 3, UnitVector::basis(3, 1), rho),
          ComponentSpec::pkbd(1.0 - 2.0 / 3, UnitVector::basis(3, 2), rho)};
}

/// One replication: fits M = 1..m_max once and evaluates the distance for
/// every beta on the same fits.
inline ProfileReplication profile_replication(const Dataset& data, const ProfileStudyConfig& cfg,
                                              std::uint64_t fit_seed) {
  ProfileReplication out;
  out.distance.assign(cfg.betas.size(), {});
  out.profiles.resize(cfg.betas.size());
  const Rng root(fit_seed);
  for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
    out.profiles[b].beta = cfg.betas[b];
    out.profiles[b].sampling_floor =
        distance_sampling_floor(cfg.betas[b], static_cast<int>(data.dim()), data.size());
  }
  for (int m = 1; m <= cfg.m_max; ++m) {
    FitConfig fc = cfg.fit;
    fc.seed = root.split(static_cast<std::uint64_t>(m)).seed();
    fc.threads = 1;
    const FitResult fitted = fit(data, static_cast<std::size_t>(m), false, fc);
    out.loglik.push_back(fitted.loglik());
    const auto ic = information_criteria(fitted.loglik(), data.size(), static_cast<std::size_t>(m),
                                         data.dim());
    for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
      const double dist = quadratic_distance(data, fitted.model, cfg.betas[b], cfg.variant);
      out.distance[b].push_back(dist);
      out.profiles[b].entries.push_back({m, dist, fitted.loglik(), ic.aic, ic.bic});
    }
  }
  for (auto& p : out.profiles) {
    p.sampling_floor_m = estimate_k(p.entries, ElbowRule::SamplingFloor, kDefaultDropTau, p.sampling_floor).m;
    p.relative_drop_m = estimate_k(p.entries, ElbowRule::RelativeDrop).m;
    p.second_difference_m = estimate_k(p.entries, ElbowRule::MaxSecondDifference).m;
    p.estimated_m = p.sampling_floor_m;
  }
  return out;
}

struct ProfileStudyResult {
  ResultTable distances;   // one row per (rho, M)
  ResultTable estimates;   // one row per (rho, beta)
};

/// Replicates the mean-distance-by-M study on three equally weighted
/// PKBD(rho) clusters in d = 3.
inline ProfileStudyResult profile_study(const ProfileStudyConfig& cfg) {
  ProfileStudyResult res;
  res.distances.columns = {"rho", "M"};
  for (double b : cfg.betas) {
    res.distances.columns.push_back("distance_mean_beta" + format_double(b));
    res.distances.columns.push_back("distance_sd_beta" + format_double(b));
  }
  for (const char* c : {"loglik_mean", "loglik_sd", "aic_mean", "bic_mean"}) res.distances.columns.push_back(c);
  res.estimates.columns = {"rho", "beta", "frac_correct_sampling_floor", "frac_correct_relative_drop",
                           "frac_correct_second_difference", "mean_estimate"};

  const auto reps = static_cast<std::size_t>(cfg.replications);
  for (double rho : cfg.rhos) {
    const auto spec = three_axis_mixture(rho);
    std::vector<ProfileReplication> out(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      auto streams = replication_streams(cfg.seed, r);
      const Dataset data = sample_mixture(spec, cfg.n, 3, streams.data);
      out[r] = profile_replication(data, cfg, streams.fit_seed);
    });
    for (int m = 1; m <= cfg.m_max; ++m) {
      std::vector<double> row = {rho, static_cast<double>(m)};
      for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
        std::vector<double> v;
        for (const auto& o : out) v.push_back(o.distance[b][static_cast<std::size_t>(m - 1)]);
        const auto ms = mean_sd(v);
        row.push_back(ms.mean);
        row.push_back(ms.sd);
      }
      std::vector<double> ll;
      for (const auto& o : out) ll.push_back(o.loglik[static_cast<std::size_t>(m - 1)]);
      const auto ms = mean_sd(ll);
      const auto ic = information_criteria(ms.mean, cfg.n, static_cast<std::size_t>(m), 3);
      row.insert(row.end(), {ms.mean, ms.sd, ic.aic, ic.bic});
      res.distances.rows.push_back(std::move(row));
    }
    for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
      double floor_ok = 0, drop_ok = 0, sd_ok = 0, mean_est = 0;
      for (const auto& o : out) {
        floor_ok += o.profiles[b].sampling_floor_m == cfg.true_m;
        drop_ok += o.profiles[b].relative_drop_m == cfg.true_m;
        sd_ok += o.profiles[b].second_difference_m == cfg.true_m;
        mean_est += o.profiles[b].sampling_floor_m;
      }
      const double k = static_cast<double>(reps);
      res.estimates.rows.push_back({rho, cfg.betas[b], floor_ok / k, drop_ok / k, sd_ok / k, mean_est / k});
    }
  }
  return res;
}

// ---- clustering-quality studies ----

struct ScoreAccumulator {
  std::vector<double> ari, precision, recall, extra;

  void add(const ClusteringScores& s, double x = 0.0) {
    ari.push_back(s.ari);
    precision.push_back(s.macro_precision);
    recall.push_back(s.macro_recall);
    extra.push_back(x);
  }

  std::vector<double> summary() const {
    const auto a = mean_sd(ari), p = mean_sd(precision), r = mean_sd(recall), e = mean_sd(extra);
    return {a.mean, a.sd, p.mean, p.sd, r.mean, r.sd, e.mean};
  }
};

inline std::vector<std::string> score_columns(const std::string& first, const std::string& extra) {
  return {first, "ari_mean", "ari_sd", "macro_precision_mean", "macro_precision_sd",
          "macro_recall_mean", "macro_recall_sd", extra};
}

struct NoiseTrial {
  ClusteringScores scores;
  double recovered = 0.0;  // share of PKBD-generated points given a non-noise label
};

/// Uniform noise (label 0) plus one PKBD(rho) cluster at e_1 (label 1),
/// fitted with M = 1 and a noise term.
inline NoiseTrial noise_trial(double uniform_share, int d, std::size_t n, double rho,
                              const FitConfig& fit_config, std::uint64_t seed, std::size_t rep) {
  auto streams = replication_streams(seed, rep);
  if (!(uniform_share >= 0.0 && uniform_share < 1.0))
    throw Error(ErrorCode::InvalidParameter, "uniform share must be in [0,1)");
  const auto cluster = ComponentSpec::pkbd(1.0 - uniform_share, UnitVector::basis(static_cast<std::size_t>(d), 0), rho);
  Dataset data;
  if (uniform_share > 0.0) {
    data = sample_mixture({ComponentSpec::uniform(uniform_share), cluster}, n, d, streams.data);
  } else {
    data = sample_mixture({cluster}, n, d, streams.data);
    data.set_labels(std::vector<int>(n, 1));
  }
  FitConfig fc = fit_config;
  fc.seed = streams.fit_seed;
  const auto fitted = fit(data, 1, true, fc);
  const auto& truth = *data.labels();
  double pk = 0, hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == 1) {
      ++pk;
      hit += fitted.assignments[i] != kNoiseLabel;
    }
  return {score_clustering(truth, fitted.assignments), pk > 0 ? hit / pk : 1.0};
}

struct GridStudyConfig {
  std::vector<double> grid;
  int replications = 100;
  std::size_t n = 200;
  double rho = 0.9;
  FitConfig fit;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Uniform share on the x-axis; d = 5, noise-enabled single-cluster fit.
inline ResultTable noise_share_study(const GridStudyConfig& cfg) {
  ResultTable t{score_columns("uniform_share", "pkbd_points_recovered"), {}};
  for (double share : cfg.grid) {
    std::vector<NoiseTrial> out(static_cast<std::size_t>(cfg.replications));
    parallel_for(out.size(), cfg.threads, [&](std::size_t r) {
      out[r] = noise_trial(share, 5, cfg.n, cfg.rho, cfg.fit, cfg.seed, r);
    });
    ScoreAccumulator acc;
    for (const auto& o : out) acc.add(o.scores, o.recovered);
    auto row = acc.summary();
    row.insert(row.begin(), share);
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Cosine of two PKBD centroids on the x-axis; 50% uniform noise plus two
/// equally weighted PKBD clusters, fitted with M = 2 and a noise term.
inline ResultTable overlap_pair_study(const GridStudyConfig& cfg) {
  ResultTable t{score_columns("cosine", "noise_weight_mean"), {}};
  for (double a : cfg.grid) {
    const auto [mu1, mu2] = centroids_pair(a);
    const std::vector<ComponentSpec> spec = {ComponentSpec::uniform(0.5), ComponentSpec::pkbd(0.25, mu1, cfg.rho),
                                             ComponentSpec::pkbd(0.25, mu2, cfg.rho)};
    std::vector<std::pair<ClusteringScores, double>> out(static_cast<std::size_t>(cfg.replications));
    parallel_for(out.size(), cfg.threads, [&](std::size_t r) {
      auto streams = replication_streams(cfg.seed, r);
      const Dataset data = sample_mixture(spec, cfg.n, 3, streams.data);
      FitConfig fc = cfg.fit;
      fc.seed = streams.fit_seed;
      const auto fitted = fit(data, 2, true, fc);
      out[r] = {score_clustering(*data.labels(), fitted.assignments), fitted.model.noise_weight};
    });
    ScoreAccumulator acc;
    for (const auto& o : out) acc.add(o.first, o.second);
    auto row = acc.summary();
    row.insert(row.begin(), a);
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Pairwise cosine of three PKBD centroids on the x-axis; fitted with M = 3.
inline ResultTable overlap_triple_study(const GridStudyConfig& cfg) {
  ResultTable t{score_columns("cosine", "triple_parameter"), {}};
  for (double c : cfg.grid) {
    const double a = triple_parameter_for_cosine(c);
    const auto mu = centroids_triple(a);
    const std::vector<ComponentSpec> spec = {ComponentSpec::pkbd(1.0 / 3, mu[0], cfg.rho),
                                             ComponentSpec::pkbd(1.0 / 3, mu[1], cfg.rho),
                                             ComponentSpec::pkbd(1.0 - 2.0 / 3, mu[2], cfg.rho)};
    std::vector<ClusteringScores> out(static_cast<std::size_t>(cfg.replications));
    parallel_for(out.size(), cfg.threads, [&](std::size_t r) {
      auto streams = replication_streams(cfg.seed, r);
      const Dataset data = sample_mixture(spec, cfg.n, 3, streams.data);
      FitConfig fc = cfg.fit;
      fc.seed = streams.fit_seed;
      out[r] = score_clustering(*data.labels(), fit(data, 3, false, fc).assignments);
    });
    ScoreAccumulator acc;
    for (const auto& o : out) acc.add(o, a);
    auto row = acc.summary();
    row.insert(row.begin(), c);
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct CorpusDesign {
  int n_docs;
  double avg_doc_size;
  int vocab_size;
};

inline const std::vector<CorpusDesign>& corpus_designs() {
  static const std::vector<CorpusDesign> designs = {
      {150, 200, 50}, {100, 150, 50}, {100, 200, 75}, {100, 20, 50}, {50, 200, 50},
      {50, 30, 60},   {50, 15, 75},   {40, 100, 20},  {40, 30, 60}};
  return designs;
}

/// LDA corpora with three topics, clustered with M = 3 and scored against
/// the argmax-topic labels.
inline ResultTable text_corpus_study(int replications, const FitConfig& fit_config, std::uint64_t seed,
                                     int threads) {
  ResultTable t{{"n_docs", "avg_doc_size", "vocab_size", "v_over_xi", "ari_mean", "ari_sd",
                 "macro_precision_mean", "macro_precision_sd", "macro_recall_mean", "macro_recall_sd",
                 "sparsity_mean"},
                {}};
  for (const auto& design : corpus_designs()) {
    LdaSpec spec;
    spec.n_docs = design.n_docs;
    spec.avg_doc_size = design.avg_doc_size;
    spec.vocab_size = design.vocab_size;
    std::vector<std::pair<ClusteringScores, double>> out(static_cast<std::size_t>(replications));
    parallel_for(out.size(), threads, [&](std::size_t r) {
      auto streams = replication_streams(seed, r);
      const auto corpus = lda_corpus(spec, streams.data);
      FitConfig fc = fit_config;
      fc.seed = streams.fit_seed;
      const auto fitted = fit(corpus.data, 3, false, fc);
      out[r] = {score_clustering(*corpus.data.labels(), fitted.assignments), corpus.sparsity};
    });
    ScoreAccumulator acc;
    for (const auto& o : out) acc.add(o.first, o.second);
    auto row = acc.summary();
    row.insert(row.begin(), {static_cast<double>(design.n_docs), design.avg_doc_size,
                             static_cast<double>(design.vocab_size), design.vocab_size / design.avg_doc_size});
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace pkbd
