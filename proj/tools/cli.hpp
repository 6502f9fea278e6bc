#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pkbd/pkbd.hpp"

namespace pkbd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNumerical = 4;

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EfficiencyTooLow: return kExitInfeasible;
    case ErrorCode::AllRunsDegenerate:
    case ErrorCode::NonFiniteUpdate:
    case ErrorCode::DegenerateResultant: return kExitNumerical;
    default: return kExitUsage;
  }
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  out << content;
}

inline std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() > 0) return value;
  if (const char* env = std::getenv("PKBD_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidParameter, std::string("PKBD_SEED is not an integer: ") + env);
    }
  }
  return 1;
}

/// Every option of a subcommand as given (or defaulted), for the manifest.
inline nlohmann::json collect_params(const CLI::App* sub) {
  nlohmann::json p = nlohmann::json::object();
  for (const auto* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      p[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
    } else if (!opt->get_default_str().empty()) {
      p[name] = opt->get_default_str();
    }
  }
  return p;
}

inline UnitVector parse_mu(const std::string& text, int d) {
  if (text.size() >= 2 && text[0] == 'e') {
    const int axis = std::stoi(text.substr(1));
    if (axis < 1 || axis > d) throw Error(ErrorCode::InvalidParameter, "--mu axis out of range: " + text);
    return UnitVector::basis(static_cast<std::size_t>(d), static_cast<std::size_t>(axis - 1));
  }
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidParameter, "--mu is not a comma list of numbers: " + text);
    }
  }
  if (static_cast<int>(v.size()) != d)
    throw Error(ErrorCode::DimensionMismatch, "--mu has " + std::to_string(v.size()) + " entries, --d is " +
                                                  std::to_string(d));
  return normalize(v);
}

inline HeaderMode parse_header_mode(const std::string& s) {
  if (s == "yes") return HeaderMode::Present;
  if (s == "no") return HeaderMode::Absent;
  return HeaderMode::Auto;
}

inline std::string emit_csv(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream o;
  fn(o);
  return o.str();
}

/// Reads one label column from "file" or "file:column" (default: the column
/// named "label", else the last column).
inline std::vector<int> read_label_spec(const std::string& spec) {
  std::string path = spec;
  std::string column;
  const auto colon = spec.rfind(':');
  if (colon != std::string::npos && !std::filesystem::exists(spec)) {
    path = spec.substr(0, colon);
    column = spec.substr(colon + 1);
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  const auto table = read_csv_table(in);
  std::size_t col = table.header.size() - 1;
  if (!column.empty()) {
    col = table.column_index(column);
  } else {
    for (std::size_t j = 0; j < table.header.size(); ++j)
      if (table.header[j] == "label") col = j;
  }
  return labels_from_column(table, col);
}

struct FitOptions {
  int restarts = 10;
  int max_iter = 500;
  double tol = 1e-6;
  std::string stop = "loglik";
  double rho_init = 0.5;
  int newton_steps = 1;
  int threads = 1;

  void add_to(CLI::App* sub) {
    sub->add_option("--restarts", restarts, "Random restarts")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", max_iter, "Iteration cap per restart")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "Relative log-likelihood change to stop")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--stop", stop, "Stop rule")->capture_default_str()->check(CLI::IsMember({"loglik", "membership", "max-iter"}));
    sub->add_option("--rho-init", rho_init, "Initial concentration")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    sub->add_option("--newton-steps", newton_steps, "Newton steps per M-step")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "Worker threads (results reproducible to tolerance, not bytes, when > 1)")
        ->capture_default_str()->check(CLI::PositiveNumber);
  }

  FitConfig config(std::uint64_t seed) const {
    FitConfig c;
    c.num_restarts = restarts;
    c.max_iterations = max_iter;
    c.loglik_tolerance = tol;
    c.stop_rule = stop == "membership" ? StopRule::MembershipStable
                  : stop == "max-iter" ? StopRule::MaxIter
                                       : StopRule::LoglikDelta;
    c.rho_init = rho_init;
    c.newton_steps_per_mstep = newton_steps;
    c.seed = seed;
    c.threads = threads;
    return c;
  }
};

struct DataOptions {
  std::string input;
  std::string label_column;
  std::string header = "auto";

  void add_to(CLI::App* sub) {
    sub->add_option("--input", input, "CSV of points; rows are normalized onto the sphere")->required();
    sub->add_option("--label-column", label_column, "Column (name or 0-based index) holding class labels");
    sub->add_option("--header", header, "Whether the first line is a header")
        ->capture_default_str()->check(CLI::IsMember({"auto", "yes", "no"}));
  }

  Dataset load() const { return read_dataset_csv(input, {parse_header_mode(header), label_column}); }
};

}  // namespace detail

/// Parses and runs one CLI invocation. Normal output goes to `out`,
/// diagnostics to `err`; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fit and sample Poisson kernel mixtures on the unit sphere"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  const auto started = std::chrono::steady_clock::now();
  RunManifest manifest;
  std::string manifest_path;
  std::uint64_t seed_value = 1;
  std::function<void()> action;

  auto add_seed = [&](CLI::App* sub) {
    return sub->add_option("--seed", seed_value, "RNG seed (falls back to $PKBD_SEED, then 1)");
  };

  // sample
  auto* s_sample = app.add_subcommand("sample", "Draw points from a PKBD, vMF or uniform law");
  std::string dist = "pkbd", mu_text = "e1", method = "auto", sample_out;
  int sample_d = 3;
  double rho = 0.5, kappa = 1.0;
  std::size_t sample_n = 100;
  s_sample->add_option("--dist", dist, "Distribution")->capture_default_str()->check(CLI::IsMember({"pkbd", "vmf", "uniform"}));
  s_sample->add_option("--d", sample_d, "Ambient dimension")->capture_default_str()->check(CLI::Range(2, 100000));
  s_sample->add_option("--rho", rho, "PKBD concentration in (0,1)")->capture_default_str();
  s_sample->add_option("--kappa", kappa, "vMF concentration >= 0")->capture_default_str();
  s_sample->add_option("--mu", mu_text, "Mean direction: comma list or e<k>")->capture_default_str();
  s_sample->add_option("--n", sample_n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
  s_sample->add_option("--method", method, "Sampler")->capture_default_str()
      ->check(CLI::IsMember({"auto", "inverse", "reject-vmf", "reject-uniform"}));
  s_sample->add_option("--out", sample_out, "Output CSV (stdout when omitted)");
  auto* sample_seed = add_seed(s_sample);
  s_sample->callback([&] {
    action = [&] {
      const std::uint64_t seed = detail::resolve_seed(sample_seed, seed_value);
      manifest.seed = seed;
      Rng rng(seed);
      SampleBatch batch;
      double predicted = 1.0;
      if (dist == "uniform") {
        batch = sample_uniform(sample_d, sample_n, rng);
      } else if (dist == "vmf") {
        batch = sample_vmf({detail::parse_mu(mu_text, sample_d), kappa}, sample_n, rng);
      } else {
        if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidParameter, "--rho must be in (0,1)");
        const PkbdComponent c(detail::parse_mu(mu_text, sample_d), rho);
        std::string m = method;
        if (m == "auto") m = sample_d == 2 ? "inverse" : "reject-vmf";
        if (m == "inverse") {
          batch = sample_pkbd_circle(c, sample_n, rng);
        } else if (m == "reject-vmf") {
          predicted = envelope_constants(rho, sample_d).efficiency;
          batch = sample_pkbd_rejection(c, sample_n, Envelope::Vmf, rng);
        } else {
          predicted = 1.0 / uniform_envelope_constant(rho, sample_d);
          batch = sample_pkbd_rejection(c, sample_n, Envelope::Uniform, rng);
        }
      }
      const std::string csv = detail::emit_csv([&](std::ostream& o) { write_points_csv(o, batch.points); });
      std::ostream& info = sample_out.empty() ? err : out;
      if (sample_out.empty()) {
        out << csv;
      } else {
        detail::write_file(sample_out, csv);
        manifest.outputs.push_back(sample_out);
        manifest_path = sample_out + ".manifest.json";
      }
      info << "points: " << batch.points.size() << "\n";
      info << "proposals: " << batch.proposals_used << "\n";
      info << "acceptance_rate: " << format_double(batch.acceptance_rate()) << "\n";
      info << "predicted_efficiency: " << format_double(predicted) << "\n";
    };
  });

  // fit
  auto* s_fit = app.add_subcommand("fit", "Fit a PKBD mixture (optionally with uniform noise)");
  detail::DataOptions fit_data;
  detail::FitOptions fit_opts;
  std::size_t clusters = 2;
  bool noise = false;
  std::string fit_prefix = "pkbd_fit";
  fit_data.add_to(s_fit);
  s_fit->add_option("--clusters", clusters, "Number of PKBD components M")->required()->check(CLI::PositiveNumber);
  s_fit->add_flag("--noise", noise, "Add a uniform noise component");
  fit_opts.add_to(s_fit);
  s_fit->add_option("--out-prefix", fit_prefix, "Prefix for output files")->capture_default_str();
  auto* fit_seed = add_seed(s_fit);
  s_fit->callback([&] {
    action = [&] {
      const std::uint64_t seed = detail::resolve_seed(fit_seed, seed_value);
      manifest.seed = seed;
      const Dataset data = fit_data.load();
      manifest.inputs.push_back(fit_data.input);
      const FitResult res = fit(data, clusters, noise, fit_opts.config(seed));
      const std::string model_path = fit_prefix + ".model.json";
      const std::string assign_path = fit_prefix + ".assignments.csv";
      const std::string trace_path = fit_prefix + ".trace.csv";
      detail::write_file(model_path, model_to_json(res.model).dump(2) + "\n");
      detail::write_file(assign_path, detail::emit_csv([&](std::ostream& o) {
                           o << "index,cluster\n";
                           for (std::size_t i = 0; i < res.assignments.size(); ++i)
                             o << i << ',' << res.assignments[i] << '\n';
                         }));
      detail::write_file(trace_path, detail::emit_csv([&](std::ostream& o) {
                           o << "iteration,loglik\n";
                           for (std::size_t i = 0; i < res.loglik_trace.size(); ++i)
                             o << i << ',' << format_double(res.loglik_trace[i]) << '\n';
                         }));
      manifest.outputs = {model_path, assign_path, trace_path};
      manifest_path = fit_prefix + ".manifest.json";
      const auto ic = information_criteria(res.loglik(), data.size(), clusters, data.dim(), noise);
      out << "loglik: " << format_double(res.loglik()) << "\n";
      out << "aic: " << format_double(ic.aic) << "\nbic: " << format_double(ic.bic) << "\n";
      out << "iterations: " << res.iterations << (res.converged ? " (converged)" : " (iteration cap)") << "\n";
      out << "winning_restart: " << res.restart_index << "\n";
      for (std::size_t k = 0; k < res.model.num_components(); ++k)
        out << "component " << k << ": weight " << format_double(res.model.weights[k]) << ", rho "
            << format_double(res.model.components[k].rho()) << "\n";
      if (noise) out << "noise_weight: " << format_double(res.model.noise_weight) << "\n";
      if (data.labels()) {
        const auto sc = score_clustering(*data.labels(), res.assignments);
        out << "ari: " << format_double(sc.ari) << "\nmacro_precision: " << format_double(sc.macro_precision)
            << "\nmacro_recall: " << format_double(sc.macro_recall) << "\n";
      }
    };
  });

  // select-k
  auto* s_sel = app.add_subcommand("select-k", "Estimate the number of clusters from the distance profile");
  detail::DataOptions sel_data;
  detail::FitOptions sel_opts;
  int max_clusters = 9;
  double beta = kDefaultBeta, tau = kDefaultDropTau;
  std::string variant = "full-cross", rule = "sampling-floor", sel_prefix = "pkbd_select", svg_path;
  sel_data.add_to(s_sel);
  s_sel->add_option("--max-clusters", max_clusters, "Largest M to fit")->capture_default_str()->check(CLI::Range(2, 1000));
  s_sel->add_option("--beta", beta, "Kernel tuning parameter in (0,1)")->capture_default_str();
  s_sel->add_option("--variant", variant, "Model-model term of the distance")->capture_default_str()
      ->check(CLI::IsMember({"full-cross", "as-printed"}));
  s_sel->add_option("--rule", rule, "Elbow rule")->capture_default_str()
      ->check(CLI::IsMember({"sampling-floor", "relative-drop", "second-difference"}));
  s_sel->add_option("--tau", tau, "Threshold of the relative-drop rule")->capture_default_str();
  sel_opts.add_to(s_sel);
  s_sel->add_option("--out-prefix", sel_prefix, "Prefix for output files")->capture_default_str();
  s_sel->add_option("--svg", svg_path, "Write the distance plot to this SVG file");
  auto* sel_seed = add_seed(s_sel);
  s_sel->callback([&] {
    action = [&] {
      const std::uint64_t seed = detail::resolve_seed(sel_seed, seed_value);
      manifest.seed = seed;
      const Dataset data = sel_data.load();
      manifest.inputs.push_back(sel_data.input);
      if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::InvalidParameter, "--beta must be in (0,1)");
      const ElbowRule r = rule == "relative-drop"       ? ElbowRule::RelativeDrop
                          : rule == "second-difference" ? ElbowRule::MaxSecondDifference
                                                        : ElbowRule::SamplingFloor;
      const auto v = variant == "as-printed" ? DistanceVariant::AsPrinted : DistanceVariant::FullCross;
      const auto profile = distance_profile(data, max_clusters, beta, sel_opts.config(seed), v, r, tau);
      const std::string csv_path = sel_prefix + ".profile.csv";
      detail::write_file(csv_path, detail::emit_csv([&](std::ostream& o) {
                           o << "M,distance,loglik,aic,bic\n";
                           for (const auto& e : profile.entries)
                             o << e.m << ',' << format_double(e.distance) << ',' << format_double(e.loglik) << ','
                               << format_double(e.aic) << ',' << format_double(e.bic) << '\n';
                         }));
      manifest.outputs.push_back(csv_path);
      if (!svg_path.empty()) {
        PlotSeries s{"distance", {}, {}};
        for (const auto& e : profile.entries) {
          s.x.push_back(e.m);
          s.y.push_back(e.distance);
        }
        detail::write_file(svg_path, svg_line_plot("Empirical distance vs M (beta = " + format_double(beta) + ")",
                                                   "number of clusters M", "distance", {s}));
        manifest.outputs.push_back(svg_path);
      }
      manifest_path = sel_prefix + ".manifest.json";
      out << "estimated_clusters: " << profile.estimated_m << (profile.no_elbow ? " (no elbow)" : "") << "\n";
      out << "sampling_floor_estimate: " << profile.sampling_floor_m << "\n";
      out << "relative_drop_estimate: " << profile.relative_drop_m << "\n";
      out << "second_difference_estimate: " << profile.second_difference_m << "\n";
      out << "sampling_floor: " << format_double(profile.sampling_floor) << "\n";
    };
  });

  // eval
  auto* s_eval = app.add_subcommand("eval", "Compare two labelings (macro precision/recall, ARI)");
  std::string truth_spec, pred_spec, eval_out;
  s_eval->add_option("--truth", truth_spec, "Truth labels: file or file:column")->required();
  s_eval->add_option("--pred", pred_spec, "Predicted labels: file or file:column")->required();
  s_eval->add_option("--out", eval_out, "Also write the JSON report here");
  s_eval->callback([&] {
    action = [&] {
      const auto truth = detail::read_label_spec(truth_spec);
      const auto pred = detail::read_label_spec(pred_spec);
      manifest.inputs = {truth_spec, pred_spec};
      if (truth.size() != pred.size())
        throw Error(ErrorCode::LengthMismatch, "truth has " + std::to_string(truth.size()) + " labels, pred has " +
                                                   std::to_string(pred.size()));
      const auto ct = contingency(truth, pred);
      const auto pr = macro_precision_recall(ct);
      const auto ari = adjusted_rand_index(ct);
      nlohmann::json j;
      j["macro_precision"] = pr.precision;
      j["macro_recall"] = pr.recall;
      j["ari"] = ari.value;
      j["ari_degenerate"] = ari.degenerate;
      j["contingency"] = {{"classes", ct.class_labels}, {"clusters", ct.cluster_labels}, {"table", ct.table}};
      const std::string text = j.dump(2) + "\n";
      out << text;
      if (!eval_out.empty()) {
        detail::write_file(eval_out, text);
        manifest.outputs.push_back(eval_out);
        manifest_path = eval_out + ".manifest.json";
      }
    };
  });

  // datagen
  auto* s_gen = app.add_subcommand("datagen", "Generate labeled synthetic data");
  std::string preset = "three-clusters", spec_path, gen_out;
  std::size_t gen_n = 100;
  double gen_rho = 0.9, share = 0.5, cosine = 0.0;
  int gen_d = 3;
  int docs = 100, vocab = 50, topics = 3;
  double doc_size = 200.0;
  s_gen->add_option("--preset", preset, "Design")->capture_default_str()
      ->check(CLI::IsMember({"three-clusters", "noise", "overlap-pair", "overlap-triple", "lda"}));
  s_gen->add_option("--spec", spec_path, "JSON mixture or LDA spec (overrides --preset)");
  s_gen->add_option("--n", gen_n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
  s_gen->add_option("--d", gen_d, "Dimension (noise preset)")->capture_default_str()->check(CLI::Range(2, 100000));
  s_gen->add_option("--rho", gen_rho, "PKBD concentration")->capture_default_str();
  s_gen->add_option("--share", share, "Uniform share (noise preset)")->capture_default_str();
  s_gen->add_option("--cosine", cosine, "Centroid cosine (overlap presets)")->capture_default_str();
  s_gen->add_option("--docs", docs, "Documents (lda)")->capture_default_str();
  s_gen->add_option("--doc-size", doc_size, "Mean document length (lda)")->capture_default_str();
  s_gen->add_option("--vocab", vocab, "Vocabulary size (lda)")->capture_default_str();
  s_gen->add_option("--topics", topics, "Topics (lda)")->capture_default_str();
  s_gen->add_option("--out", gen_out, "Output CSV (stdout when omitted)");
  auto* gen_seed = add_seed(s_gen);
  s_gen->callback([&] {
    action = [&] {
      const std::uint64_t seed = detail::resolve_seed(gen_seed, seed_value);
      manifest.seed = seed;
      Rng rng(seed);
      Dataset data;
      std::string summary;
      auto lda_from = [&](const LdaSpec& spec) {
        const auto corpus = lda_corpus(spec, rng);
        summary = "sparsity: " + format_double(corpus.sparsity) + "\n";
        return corpus.data;
      };
      if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw Error(ErrorCode::ParseError, "cannot open " + spec_path);
        manifest.inputs.push_back(spec_path);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
          if (j.contains("lda")) {
            const auto& l = j["lda"];
            LdaSpec spec;
            spec.k_topics = l.value("k_topics", spec.k_topics);
            spec.vocab_size = l.value("vocab_size", spec.vocab_size);
            spec.avg_doc_size = l.value("avg_doc_size", spec.avg_doc_size);
            spec.n_docs = l.value("n_docs", spec.n_docs);
            spec.dirichlet_alpha = l.value("dirichlet_alpha", std::vector<double>{});
            spec.word_prior = l.value("word_prior", std::vector<double>{});
            spec.word_concentration = l.value("word_concentration", 0.0);
            data = lda_from(spec);
          } else {
            const int d = j.at("d").get<int>();
            std::vector<ComponentSpec> comps;
            // mu is either a coordinate array or the same text form as --mu
            auto mu_of = [d](const nlohmann::json& c) {
              const auto& m = c.at("mu");
              return m.is_string() ? detail::parse_mu(m.get<std::string>(), d)
                                   : normalize(m.get<std::vector<double>>());
            };
            for (const auto& c : j.at("components")) {
              const auto kind = c.at("kind").get<std::string>();
              const double w = c.at("weight").get<double>();
              if (kind == "uniform") comps.push_back(ComponentSpec::uniform(w));
              else if (kind == "pkbd")
                comps.push_back(ComponentSpec::pkbd(w, mu_of(c), c.at("rho").get<double>()));
              else if (kind == "vmf")
                comps.push_back(ComponentSpec::vmf(w, mu_of(c), c.at("kappa").get<double>()));
              else throw Error(ErrorCode::ParseError, "unknown component kind " + kind);
            }
            data = sample_mixture(comps, j.value("n", gen_n), d, rng);
          }
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::ParseError, std::string("spec JSON: ") + e.what());
        }
      } else if (preset == "lda") {
        LdaSpec spec;
        spec.k_topics = topics;
        spec.vocab_size = vocab;
        spec.avg_doc_size = doc_size;
        spec.n_docs = docs;
        data = lda_from(spec);
      } else if (preset == "noise") {
        data = sample_mixture({ComponentSpec::uniform(share),
                               ComponentSpec::pkbd(1.0 - share, UnitVector::basis(static_cast<std::size_t>(gen_d), 0), gen_rho)},
                              gen_n, gen_d, rng);
      } else if (preset == "overlap-pair") {
        const auto [m1, m2] = centroids_pair(cosine);
        data = sample_mixture({ComponentSpec::uniform(0.5), ComponentSpec::pkbd(0.25, m1, gen_rho),
                               ComponentSpec::pkbd(0.25, m2, gen_rho)},
                              gen_n, 3, rng);
      } else if (preset == "overlap-triple") {
        const auto mu = centroids_triple(triple_parameter_for_cosine(cosine));
        data = sample_mixture({ComponentSpec::pkbd(1.0 / 3, mu[0], gen_rho), ComponentSpec::pkbd(1.0 / 3, mu[1], gen_rho),
                               ComponentSpec::pkbd(1.0 - 2.0 / 3, mu[2], gen_rho)},
                              gen_n, 3, rng);
      } else {
        data = sample_mixture(three_axis_mixture(gen_rho), gen_n, 3, rng);
      }
      const std::string csv = detail::emit_csv([&](std::ostream& o) { write_dataset_csv(o, data); });
      if (gen_out.empty()) {
        out << csv;
        err << summary;
      } else {
        detail::write_file(gen_out, csv);
        manifest.outputs.push_back(gen_out);
        manifest_path = gen_out + ".manifest.json";
        out << "points: " << data.size() << "\ndimension: " << data.dim() << "\n" << summary;
      }
    };
  });

  // replicate
  auto* s_rep = app.add_subcommand("replicate", "Run one of the simulation studies at desk scale");
  std::string experiment, out_dir = "results";
  int replications = 50, rep_threads = 1, rep_restarts = 10;
  s_rep->add_option("--experiment", experiment, "Study to run")->required()
      ->check(CLI::IsMember({"tableA1", "tableA6", "fig3", "fig4", "fig5", "table4"}));
  s_rep->add_option("--replications", replications, "Monte Carlo replications")->capture_default_str()->check(CLI::PositiveNumber);
  s_rep->add_option("--restarts", rep_restarts, "Random restarts per fit")->capture_default_str()->check(CLI::PositiveNumber);
  s_rep->add_option("--threads", rep_threads, "Replications run in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  s_rep->add_option("--out-dir", out_dir, "Directory for CSV and SVG outputs")->capture_default_str();
  auto* rep_seed = add_seed(s_rep);
  s_rep->callback([&] {
    action = [&] {
      const std::uint64_t seed = detail::resolve_seed(rep_seed, seed_value);
      manifest.seed = seed;
      FitConfig fc;
      fc.num_restarts = rep_restarts;
      auto save = [&](const std::string& name, const ResultTable& t) {
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        detail::write_file(path, detail::emit_csv([&](std::ostream& o) { t.write_csv(o); }));
        manifest.outputs.push_back(path);
        out << "wrote " << path << "\n";
      };
      auto save_svg = [&](const std::string& name, const std::string& svg) {
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        detail::write_file(path, svg);
        manifest.outputs.push_back(path);
      };
      auto grid_plot = [&](const std::string& name, const std::string& title, const std::string& xlabel,
                           const ResultTable& t) {
        PlotSeries ari{"ARI", {}, {}}, mp{"macro precision", {}, {}}, mr{"macro recall", {}, {}};
        for (const auto& r : t.rows) {
          ari.x.push_back(r[0]);
          mp.x.push_back(r[0]);
          mr.x.push_back(r[0]);
          ari.y.push_back(r[1]);
          mp.y.push_back(r[3]);
          mr.y.push_back(r[5]);
        }
        save_svg(name, svg_line_plot(title, xlabel, "score", {ari, mp, mr}));
      };
      GridStudyConfig g;
      g.replications = replications;
      g.fit = fc;
      g.seed = seed;
      g.threads = rep_threads;
      if (experiment == "tableA6") {
        save("tableA6.csv", efficiency_table());
      } else if (experiment == "tableA1") {
        ProfileStudyConfig cfg;
        cfg.replications = replications;
        cfg.fit = fc;
        cfg.seed = seed;
        cfg.threads = rep_threads;
        const auto res = profile_study(cfg);
        save("tableA1_distances.csv", res.distances);
        save("tableA1_estimates.csv", res.estimates);
        for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
          std::vector<PlotSeries> series;
          for (double r : {0.9, 0.6, 0.3}) {
            PlotSeries s{"rho " + format_double(r), {}, {}};
            for (const auto& row : res.distances.rows)
              if (row[0] == r) {
                s.x.push_back(row[1]);
                s.y.push_back(row[2 + 2 * b]);
              }
            series.push_back(std::move(s));
          }
          save_svg("tableA1_beta" + format_double(cfg.betas[b]) + ".svg",
                   svg_line_plot("Mean distance vs M (beta = " + format_double(cfg.betas[b]) + ")",
                                 "number of clusters M", "mean distance", series));
        }
        for (const auto& row : res.estimates.rows)
          out << "rho " << format_double(row[0]) << ", beta " << format_double(row[1])
              << ": correct estimate in " << format_double(row[2]) << " of replications\n";
      } else if (experiment == "fig3") {
        g.grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        const auto t = noise_share_study(g);
        save("fig3.csv", t);
        grid_plot("fig3.svg", "Uniform noise share, d = 5", "uniform share", t);
      } else if (experiment == "fig4") {
        g.grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        const auto t = overlap_pair_study(g);
        save("fig4.csv", t);
        grid_plot("fig4.svg", "Two clusters plus 50% noise", "cosine of centroids", t);
      } else if (experiment == "fig5") {
        g.grid = {-0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 0.9};
        const auto t = overlap_triple_study(g);
        save("fig5.csv", t);
        grid_plot("fig5.svg", "Three clusters", "cosine of centroids", t);
      } else {
        save("table4.csv", text_corpus_study(replications, fc, seed, rep_threads));
      }
      manifest_path = (std::filesystem::path(out_dir) / (experiment + ".manifest.json")).string();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    // help and version requests, printed for the subcommand that asked
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    action();
    const CLI::App* sub = app.get_subcommands().front();
    manifest.subcommand = sub->get_name();
    manifest.params = detail::collect_params(sub);
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!manifest_path.empty()) detail::write_file(manifest_path, manifest_to_json(manifest).dump(2) + "\n");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace pkbd::cli
