// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tcrm/eval.hpp"
#include "tcrm/ingest.hpp"
#include "tcrm/io.hpp"
#include "tcrm/lfm.hpp"
#include "tcrm/serialization.hpp"
#include "tcrm/tgap_pfa.hpp"

namespace tcrm {

namespace fs = std::filesystem;

enum class ModelKind { lfm, topics };

inline std::string to_string(ModelKind m) { return m == ModelKind::lfm ? "lfm" : "topics"; }

inline ModelKind parse_model(const std::string& s) {
  if (s == "lfm") return ModelKind::lfm;
  if (s == "topics") return ModelKind::topics;
  throw UsageError("unknown model '" + s + "' (expected lfm or topics)");
}

/// Everything a fit needs; the snapshot in config.json replays a run.
struct RunConfig {
  ModelKind model = ModelKind::topics;
  std::size_t truncation = 0;  // 0: model default (20 lfm, 100 topics)
  std::size_t iterations = 1000;
  std::size_t burnin = 500;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  std::size_t chains = 1;
  bool dynamic = true;
  double alpha_theta = 0.05;
  double e = 1.0;
  double c0 = 1.0;
  double d0 = 1.0;
  std::vector<double> widths;  // empty: model default
  double noise_shape = 1.0;
  double noise_scale = 1.0;
  double feature_shape = 1.0;
  double feature_scale = 1.0;
  double holdout_words = 0.0;  // topics: word-level split fraction
  double holdout_docs = 0.0;   // topics: document-level split fraction per decade
  double decade_width = 10.0;
  std::string data;
  std::string vocab;
  std::string out;

  void validate() const {
    if (iterations == 0) throw ParameterError("iterations must be positive");
    if (burnin >= iterations) throw ParameterError("burn-in must be smaller than the number of iterations");
    if (thin == 0) throw ParameterError("thinning interval must be at least 1");
    if (chains == 0) throw ParameterError("need at least one chain");
    if (!(holdout_words >= 0.0 && holdout_words < 1.0) || !(holdout_docs >= 0.0 && holdout_docs < 1.0)) {
      throw ParameterError("holdout fractions must lie in [0, 1)");
    }
    if (!(decade_width > 0.0)) throw ParameterError("decade width must be positive");
  }

  /// Sweeps (1-based) after burn-in at multiples of the thinning interval.
  bool retains(std::size_t sweep) const { return sweep > burnin && (sweep - burnin) % thin == 0; }
  std::size_t retained() const { return (iterations - burnin) / thin; }

  LfmConfig lfm() const {
    LfmConfig c;
    if (truncation) c.truncation = truncation;
    c.dynamic = dynamic;
    c.c0 = c0;
    c.d0 = d0;
    if (!widths.empty()) c.widths = widths;
    c.noise_shape = noise_shape;
    c.noise_scale = noise_scale;
    c.feature_shape = feature_shape;
    c.feature_scale = feature_scale;
    return c;
  }

  TopicConfig topics() const {
    TopicConfig c;
    if (truncation) c.truncation = truncation;
    c.dynamic = dynamic;
    c.alpha_theta = alpha_theta;
    c.e = e;
    c.c0 = c0;
    c.d0 = d0;
    if (!widths.empty()) c.widths = widths;
    return c;
  }
};

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"model", to_string(c.model)},
           {"truncation", c.truncation},
           {"iterations", c.iterations},
           {"burnin", c.burnin},
           {"thin", c.thin},
           {"seed", c.seed},
           {"chains", c.chains},
           {"dynamic", c.dynamic},
           {"alpha_theta", c.alpha_theta},
           {"e", c.e},
           {"c0", c.c0},
           {"d0", c.d0},
           {"widths", c.widths},
           {"noise_shape", c.noise_shape},
           {"noise_scale", c.noise_scale},
           {"feature_shape", c.feature_shape},
           {"feature_scale", c.feature_scale},
           {"holdout_words", c.holdout_words},
           {"holdout_docs", c.holdout_docs},
           {"decade_width", c.decade_width},
           {"data", c.data},
           {"vocab", c.vocab}};
  if (c.model == ModelKind::lfm) {
    j["model_config"] = c.lfm();
  } else {
    j["model_config"] = c.topics();
  }
}

inline void from_json(const json& j, RunConfig& c) {
  c.model = parse_model(j.at("model").get<std::string>());
  j.at("truncation").get_to(c.truncation);
  j.at("iterations").get_to(c.iterations);
  j.at("burnin").get_to(c.burnin);
  j.at("thin").get_to(c.thin);
  j.at("seed").get_to(c.seed);
  j.at("chains").get_to(c.chains);
  j.at("dynamic").get_to(c.dynamic);
  j.at("alpha_theta").get_to(c.alpha_theta);
  j.at("e").get_to(c.e);
  j.at("c0").get_to(c.c0);
  j.at("d0").get_to(c.d0);
  j.at("widths").get_to(c.widths);
  j.at("noise_shape").get_to(c.noise_shape);
  j.at("noise_scale").get_to(c.noise_scale);
  j.at("feature_shape").get_to(c.feature_shape);
  j.at("feature_scale").get_to(c.feature_scale);
  j.at("holdout_words").get_to(c.holdout_words);
  j.at("holdout_docs").get_to(c.holdout_docs);
  j.at("decade_width").get_to(c.decade_width);
  j.at("data").get_to(c.data);
  j.at("vocab").get_to(c.vocab);
}

/// Output directory: explicit, else under $TCRM_OUTPUT_ROOT (or ./runs).
inline fs::path resolve_output(const std::string& out, const std::string& fallback_name) {
  if (!out.empty()) return out;
  const char* root = std::getenv("TCRM_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "runs") / fallback_name;
}

/// {metric, value, std, n_folds, seed}
inline json evaluation_report(const std::string& metric, double value, double stddev, std::size_t folds,
                              std::uint64_t seed) {
  return json{{"metric", metric}, {"value", value}, {"std", stddev}, {"n_folds", folds}, {"seed", seed}};
}

inline void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(1) + "\n"); }

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace detail {

inline Corpus load_corpus(const fs::path& path, std::size_t vocabulary_size) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus " + path.string());
  return read_corpus_tsv(in, vocabulary_size);
}

inline LfmData load_lfm(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open data " + path.string());
  return read_lfm_tsv(in);
}

inline std::string corpus_text(const Corpus& c) {
  std::ostringstream s;
  write_corpus_tsv(s, c);
  return s.str();
}

inline std::string sample_name(std::size_t sweep) {
  std::ostringstream s;
  s << "sample-" << std::setw(6) << std::setfill('0') << sweep << ".json";
  return s.str();
}

inline std::vector<fs::path> sample_files(const fs::path& chain_dir) {
  std::vector<fs::path> out;
  if (!fs::exists(chain_dir / "samples")) return out;
  for (const auto& e : fs::directory_iterator(chain_dir / "samples")) {
    if (e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double mean(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x / static_cast<double>(v.size());
  return m;
}

inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Words per document of `held`, placed at the index of the same id in `train`.
inline Corpus align_heldout(const Corpus& train, const Corpus& held) {
  std::map<std::string, std::size_t> index;
  for (std::size_t n = 0; n < train.size(); ++n) index[train.documents[n].id] = n;
  Corpus out;
  out.vocabulary_size = train.vocabulary_size;
  out.timestamps = train.timestamps;
  for (const auto& d : train.documents) out.documents.push_back({d.id, d.timestamp, {}});
  for (const auto& d : held.documents) {
    const auto it = index.find(d.id);
    if (it == index.end()) throw FormatError("held-out document '" + d.id + "' is not in the training set");
    for (const auto& w : d.words) {
      if (w.word >= train.vocabulary_size) throw DimensionError("held-out word outside the vocabulary");
    }
    out.documents[it->second].words = d.words;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

struct RunLayout {
  fs::path root;
  fs::path chain(std::size_t c) const { return root / ("chain-" + std::to_string(c)); }
};

/// Topic-model fit. Writes config.json, train.tsv (plus split files when
/// holding out) and per chain trace.csv and samples/sample-*.json.
inline RunLayout fit_topics(RunConfig cfg) {
  cfg.model = ModelKind::topics;
  cfg.validate();
  const TopicConfig tc = cfg.topics();
  tc.validate();
  RunLayout lay{resolve_output(cfg.out, "topics-seed" + std::to_string(cfg.seed))};
  fs::create_directories(lay.root);

  std::size_t vocab_size = 0;
  if (!cfg.vocab.empty()) {
    std::ifstream in(cfg.vocab);
    if (!in) throw FormatError("cannot open vocabulary " + cfg.vocab);
    vocab_size = read_vocabulary(in).size();
  }
  Corpus corpus = detail::load_corpus(cfg.data, vocab_size);
  Rng split_rng(cfg.seed, 0xfeedULL);
  if (cfg.holdout_docs > 0.0) {
    std::vector<std::size_t> group;
    std::map<long long, std::size_t> decade_ids;
    for (double t : corpus.timestamps) {
      const auto d = static_cast<long long>(std::floor(t / cfg.decade_width));
      group.push_back(decade_ids.emplace(d, decade_ids.size()).first->second);
    }
    const auto split = split_documents(corpus, group, cfg.holdout_docs, split_rng);
    write_file_atomic(lay.root / "heldout-docs.tsv", detail::corpus_text(subset(corpus, split.heldout)));
    corpus = subset(corpus, split.train);
  }
  if (cfg.holdout_words > 0.0) {
    const auto split = split_words(corpus, cfg.holdout_words, split_rng);
    // documents emptied by the split leave both sides
    std::vector<std::size_t> kept;
    for (std::size_t n = 0; n < corpus.size(); ++n) {
      if (!split.train.documents[n].words.empty()) kept.push_back(n);
    }
    write_file_atomic(lay.root / "heldout.tsv", detail::corpus_text(subset(split.heldout, kept)));
    corpus = subset(split.train, kept);
  }
  {
    // train on exactly what train.tsv reads back as
    const std::string text = detail::corpus_text(corpus);
    write_file_atomic(lay.root / "train.tsv", text);
    std::istringstream in(text);
    corpus = read_corpus_tsv(in, corpus.vocabulary_size);
  }
  json snapshot = cfg;
  snapshot["vocabulary_size"] = corpus.vocabulary_size;
  write_json(lay.root / "config.json", snapshot);

  for (std::size_t c = 0; c < cfg.chains; ++c) {
    const auto dir = lay.chain(c);
    fs::remove_all(dir);
    fs::create_directories(dir / "samples");
    Rng rng(cfg.seed, c + 1);
    auto state = topic_init(corpus, tc, rng);
    TraceWriter trace(dir / "trace.csv");
    for (std::size_t sweep = 1; sweep <= cfg.iterations; ++sweep) {
      gibbs_sweep(state, corpus, tc, rng);
      trace.row(sweep, state.active_topics(), topic_log_likelihood(state, corpus));
      if (cfg.retains(sweep)) {
        write_json(dir / "samples" / detail::sample_name(sweep), json(make_topic_sample(state, tc)));
      }
    }
  }
  return lay;
}

/// Latent feature model fit: config.json, data.tsv and per chain
/// trace.csv and samples/sample-*.json.
inline RunLayout fit_lfm(RunConfig cfg) {
  cfg.model = ModelKind::lfm;
  cfg.validate();
  const LfmConfig lc = cfg.lfm();
  lc.validate();
  RunLayout lay{resolve_output(cfg.out, "lfm-seed" + std::to_string(cfg.seed))};
  fs::create_directories(lay.root);
  const LfmData data = detail::load_lfm(cfg.data);
  data.validate();
  std::ostringstream copy;
  write_lfm_tsv(copy, data);
  write_file_atomic(lay.root / "data.tsv", copy.str());
  write_json(lay.root / "config.json", json(cfg));

  for (std::size_t c = 0; c < cfg.chains; ++c) {
    const auto dir = lay.chain(c);
    fs::remove_all(dir);
    fs::create_directories(dir / "samples");
    Rng rng(cfg.seed, c + 1);
    auto state = lfm_init(data, lc, rng);
    TraceWriter trace(dir / "trace.csv");
    for (std::size_t sweep = 1; sweep <= cfg.iterations; ++sweep) {
      lfm_gibbs_sweep(state, data, lc, rng);
      trace.row(sweep, state.active_features(), lfm_log_likelihood(state, data));
      if (cfg.retains(sweep)) write_json(dir / "samples" / detail::sample_name(sweep), json(state));
    }
  }
  return lay;
}

inline RunConfig load_run_config(const fs::path& run) { return read_json(run / "config.json").get<RunConfig>(); }

inline Corpus load_training_corpus(const fs::path& run) {
  const auto j = read_json(run / "config.json");
  return detail::load_corpus(run / "train.tsv", j.at("vocabulary_size").get<std::size_t>());
}

inline std::vector<TopicSample> load_topic_samples(const fs::path& chain_dir) {
  std::vector<TopicSample> out;
  for (const auto& f : detail::sample_files(chain_dir)) out.push_back(read_json(f).get<TopicSample>());
  return out;
}

/// Held-out perplexity of a topic run, pooled over chains; std is across
/// chains. Writes perplexity.json into the run directory.
inline json evaluate_perplexity(const fs::path& run, const std::string& heldout_path = "") {
  const auto cfg = load_run_config(run);
  if (cfg.model != ModelKind::topics) throw UsageError("perplexity needs a topic-model run");
  const Corpus train = load_training_corpus(run);
  const fs::path hp = heldout_path.empty() ? run / "heldout.tsv" : fs::path(heldout_path);
  const Corpus held = detail::align_heldout(train, detail::load_corpus(hp, train.vocabulary_size));
  PerplexityAccumulator pooled(held);
  std::vector<double> per_chain;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    const auto samples = load_topic_samples(RunLayout{run}.chain(c));
    if (samples.empty()) continue;
    PerplexityAccumulator acc(held);
    for (const auto& s : samples) {
      acc.add(s);
      pooled.add(s);
    }
    per_chain.push_back(acc.value());
  }
  const auto report = evaluation_report("perplexity", pooled.value(), detail::stddev(per_chain), per_chain.size(), cfg.seed);
  write_json(run / "perplexity.json", report);
  return report;
}

/// Decade of each held-out document under the run's posterior samples, with
/// candidate decades built from the training timestamps. Writes
/// predictions.csv and decade.json.
inline json evaluate_decades(const fs::path& run, const std::string& docs_path = "") {
  const auto cfg = load_run_config(run);
  if (cfg.model != ModelKind::topics) throw UsageError("decade prediction needs a topic-model run");
  const Corpus train = load_training_corpus(run);
  const fs::path dp = docs_path.empty() ? run / "heldout-docs.tsv" : fs::path(docs_path);
  const Corpus docs = detail::load_corpus(dp, train.vocabulary_size);
  if (docs.size() == 0) throw UsageError("no documents to place");

  std::vector<long long> labels;
  std::vector<std::vector<std::size_t>> decades;
  for (std::size_t t = 0; t < train.timestamps.size(); ++t) {
    const auto d = static_cast<long long>(std::floor(train.timestamps[t] / cfg.decade_width));
    if (labels.empty() || labels.back() != d) {
      labels.push_back(d);
      decades.emplace_back();
    }
    decades.back().push_back(t);
  }
  std::vector<TopicSample> all;
  std::vector<std::vector<TopicSample>> chains;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    chains.push_back(load_topic_samples(RunLayout{run}.chain(c)));
    all.insert(all.end(), chains.back().begin(), chains.back().end());
  }
  const DecadePredictor pooled(all, train.timestamps, decades);
  std::vector<double> per_chain;
  for (const auto& samples : chains) {
    if (samples.empty()) continue;
    const DecadePredictor pred(samples, train.timestamps, decades);
    double hits = 0.0;
    for (const auto& d : docs.documents) {
      hits += labels[pred.predict(d)] == static_cast<long long>(std::floor(docs.timestamps[d.timestamp] / cfg.decade_width));
    }
    per_chain.push_back(hits / static_cast<double>(docs.size()));
  }
  std::ostringstream csv;
  csv << "doc_id,true_decade,predicted_decade\n";
  double hits = 0.0;
  for (const auto& d : docs.documents) {
    const auto truth = static_cast<long long>(std::floor(docs.timestamps[d.timestamp] / cfg.decade_width));
    const long long guess = labels[pooled.predict(d)];
    hits += guess == truth;
    csv << d.id << ',' << format_double(static_cast<double>(truth) * cfg.decade_width) << ','
        << format_double(static_cast<double>(guess) * cfg.decade_width) << '\n';
  }
  write_file_atomic(run / "predictions.csv", csv.str());
  const auto report = evaluation_report("decade_accuracy", hits / static_cast<double>(docs.size()),
                                        detail::stddev(per_chain), per_chain.size(), cfg.seed);
  write_json(run / "decade.json", report);
  return report;
}

/// Plot-ready summaries of chain 0. Topics: topics.csv (top words per topic,
/// mean over samples) and activation.csv (mean r over documents at each
/// timestamp). LFM: features.csv (final sample) and activation.csv (mean
/// thinning curves).
inline void write_report(const fs::path& run, std::size_t top = 10) {
  const auto cfg = load_run_config(run);
  const RunLayout lay{run};
  if (cfg.model == ModelKind::topics) {
    const Corpus train = load_training_corpus(run);
    std::vector<std::string> vocab;
    if (!cfg.vocab.empty()) {
      std::ifstream in(cfg.vocab);
      vocab = read_vocabulary(in);
    }
    const auto samples = load_topic_samples(lay.chain(0));
    if (samples.empty()) throw UsageError("run has no retained samples");
    const auto K = samples[0].topics.rows();
    const auto P = samples[0].topics.cols();
    const auto T = train.timestamps.size();
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(K, P), act = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(T));
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(K);
    const auto docs_at = train.counts_per_timestamp();
    const double B = static_cast<double>(samples.size());
    for (const auto& s : samples) {
      theta += s.topics / B;
      for (Eigen::Index k = 0; k < K; ++k) mass[k] += s.masses[static_cast<std::size_t>(k)] / B;
      for (std::size_t n = 0; n < train.size(); ++n) {
        const auto t = static_cast<Eigen::Index>(train.documents[n].timestamp);
        act.col(t) += s.r.col(static_cast<Eigen::Index>(n)).cast<double>() /
                      (B * static_cast<double>(docs_at[static_cast<std::size_t>(t)]));
      }
    }
    std::ostringstream topics, curves;
    topics << "topic,mass,rank,word,probability\n";
    for (Eigen::Index k = 0; k < K; ++k) {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(P));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return theta(k, a) > theta(k, b); });
      for (std::size_t i = 0; i < std::min<std::size_t>(top, order.size()); ++i) {
        const auto w = order[i];
        const std::string word = static_cast<std::size_t>(w) < vocab.size() ? vocab[static_cast<std::size_t>(w)]
                                                                            : "w" + std::to_string(w);
        topics << k << ',' << format_double(mass[k]) << ',' << i + 1 << ',' << word << ','
               << format_double(theta(k, w)) << '\n';
      }
    }
    curves << "topic,timestamp,activation\n";
    for (Eigen::Index k = 0; k < K; ++k) {
      for (std::size_t t = 0; t < T; ++t) {
        curves << k << ',' << format_double(train.timestamps[t]) << ',' << format_double(act(k, static_cast<Eigen::Index>(t)))
               << '\n';
      }
    }
    write_file_atomic(run / "topics.csv", topics.str());
    write_file_atomic(run / "activation.csv", curves.str());
    return;
  }

  const LfmData data = detail::load_lfm(run / "data.tsv");
  const auto files = detail::sample_files(lay.chain(0));
  if (files.empty()) throw UsageError("run has no retained samples");
  Eigen::MatrixXd curves;
  LfmState last;
  for (const auto& f : files) {
    last = read_json(f).get<LfmState>();
    const Eigen::MatrixXd c = lfm_curves(last, data.grid) / static_cast<double>(files.size());
    curves = curves.size() ? Eigen::MatrixXd(curves + c) : c;
  }
  std::ostringstream feats, act;
  feats << "feature,mass,coordinate,value\n";
  const Eigen::MatrixXd A = last.feature_matrix();
  for (Eigen::Index k = 0; k < A.rows(); ++k) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      feats << k << ',' << format_double(last.crm.atoms[static_cast<std::size_t>(k)].mass) << ',' << j << ','
            << format_double(A(k, j)) << '\n';
    }
  }
  act << "feature,covariate,probability\n";
  for (Eigen::Index k = 0; k < curves.rows(); ++k) {
    for (Eigen::Index t = 0; t < curves.cols(); ++t) {
      act << k << ',' << format_double(data.grid[static_cast<std::size_t>(t)]) << ',' << format_double(curves(k, t)) << '\n';
    }
  }
  write_file_atomic(run / "features.csv", feats.str());
  write_file_atomic(run / "activation.csv", act.str());
}

// ---------------------------------------------------------------------------
// Data producers

inline void run_ingest(const fs::path& raw_path, const fs::path& out, const IngestOptions& opt) {
  std::ifstream in(raw_path);
  if (!in) throw FormatError("cannot open " + raw_path.string());
  const auto raw = read_raw_documents(in);
  const auto result = ingest(raw, opt);
  std::ostringstream vocab;
  write_vocabulary(vocab, result.vocabulary);
  write_file_atomic(out / "corpus.tsv", detail::corpus_text(result.corpus));
  write_file_atomic(out / "vocab.txt", vocab.str());
  write_json(out / "ingest.json", json{{"documents", result.corpus.size()},
                                       {"dropped_documents", result.dropped_documents},
                                       {"vocabulary_size", result.vocabulary.size()},
                                       {"tokens", result.corpus.total()},
                                       {"min_count", opt.min_count},
                                       {"tfidf_quantile", opt.tfidf_quantile},
                                       {"paragraphs_per_document", opt.paragraphs_per_document}});
}

inline void run_synth_lfm(std::uint64_t seed, const fs::path& out, const BagOfItemsOptions& opt = {}) {
  Rng rng(seed);
  const auto bag = generate_bag_of_items(rng, opt);
  std::ostringstream data;
  write_lfm_tsv(data, bag.draw.data);
  write_file_atomic(out / "data.tsv", data.str());
  std::ostringstream curves;
  curves << "feature,covariate,probability\n";
  for (Eigen::Index k = 0; k < bag.curves.rows(); ++k) {
    for (Eigen::Index t = 0; t < bag.curves.cols(); ++t) {
      curves << k << ',' << format_double(bag.draw.data.grid[static_cast<std::size_t>(t)]) << ','
             << format_double(bag.curves(k, t)) << '\n';
    }
  }
  write_file_atomic(out / "curves.csv", curves.str());
  write_json(out / "truth.json", json{{"seed", seed},
                                      {"features", matrix_to_json(bag.truth.features)},
                                      {"masses", bag.truth.masses},
                                      {"kernels", bag.truth.kernels},
                                      {"noise_variance", bag.truth.noise_variance},
                                      {"curves", matrix_to_json(bag.curves)}});
}

inline void run_synth_corpus(std::uint64_t seed, const fs::path& out, std::size_t K, std::size_t P, std::size_t T,
                             std::size_t docs_per_t, const SyntheticCorpusOptions& opt = {}) {
  Rng rng(seed);
  const auto synth = generate_synthetic_corpus(K, P, T, docs_per_t, rng, opt);
  write_file_atomic(out / "corpus.tsv", detail::corpus_text(synth.corpus));
  std::ostringstream vocab;
  for (std::size_t p = 0; p < P; ++p) vocab << 'w' << p << '\n';
  write_file_atomic(out / "vocab.txt", vocab.str());
  write_json(out / "truth.json", json{{"seed", seed},
                                      {"topics", matrix_to_json(synth.topics)},
                                      {"masses", synth.masses},
                                      {"kernels", synth.kernels}});
}

}  // namespace tcrm
