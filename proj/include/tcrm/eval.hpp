// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/maximum_weighted_matching.hpp>

#include "tcrm/error.hpp"
#include "tcrm/lfm.hpp"
#include "tcrm/random.hpp"
#include "tcrm/tgap_pfa.hpp"
#include "tcrm/thinning.hpp"

namespace tcrm {

// ---------------------------------------------------------------------------
// Held-out splits

/// Train and held-out counts over the same document list.
struct HeldoutSplit {
  Corpus train;
  Corpus heldout;
};

/// Holds out each token independently with probability `fraction`
/// (a binomial split of every count).
inline HeldoutSplit split_words(const Corpus& corpus, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("holdout fraction must lie in [0, 1]");
  HeldoutSplit out{corpus, corpus};
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    auto& train = out.train.documents[n].words;
    auto& held = out.heldout.documents[n].words;
    train.clear();
    held.clear();
    for (const auto& w : corpus.documents[n].words) {
      const auto h = static_cast<std::uint32_t>(binomial(rng, w.count, fraction));
      if (w.count - h > 0) train.push_back({w.word, w.count - h});
      if (h > 0) held.push_back({w.word, h});
    }
  }
  return out;
}

/// Disjoint document sets: within each group of timestamps (a decade, say)
/// round(fraction * size) documents chosen uniformly are held out.
struct DocumentSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

inline DocumentSplit split_documents(const Corpus& corpus, std::span<const std::size_t> group_of_timestamp,
                                     double fraction, Rng& rng) {
  detail::require_same_size(corpus.timestamps.size(), group_of_timestamp.size(), "timestamp groups");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("holdout fraction must lie in [0, 1]");
  std::size_t groups = 0;
  for (std::size_t g : group_of_timestamp) groups = std::max(groups, g + 1);
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    members[group_of_timestamp[corpus.documents[n].timestamp]].push_back(n);
  }
  DocumentSplit out;
  std::vector<std::uint8_t> held(corpus.size(), 0);
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    const auto h = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(m.size())));
    for (std::size_t i = 0; i < h; ++i) held[m[i]] = 1;
  }
  for (std::size_t n = 0; n < corpus.size(); ++n) (held[n] ? out.heldout : out.train).push_back(n);
  return out;
}

/// The documents with the given indices, in that order.
inline Corpus subset(const Corpus& corpus, std::span<const std::size_t> indices) {
  Corpus out;
  out.vocabulary_size = corpus.vocabulary_size;
  out.timestamps = corpus.timestamps;
  for (std::size_t n : indices) out.documents.push_back(corpus.documents.at(n));
  return out;
}

// ---------------------------------------------------------------------------
// Perplexity

/// Streams posterior samples into the per-document predictive word
/// distribution and evaluates held-out perplexity
///
///   exp(-(1/y..) sum y_pn log [sum_b sum_k theta pi r beta / sum_b sum_k pi r beta]).
class PerplexityAccumulator {
 public:
  explicit PerplexityAccumulator(const Corpus& heldout) : heldout_(heldout) {
    if (heldout_.total() == 0) throw UsageError("held-out set has no tokens");
    for (const auto& d : heldout_.documents) {
      offsets_.push_back(numerators_.size());
      numerators_.resize(numerators_.size() + d.words.size(), 0.0);
    }
    denominators_.assign(heldout_.size(), 0.0);
  }

  void add(const TopicSample& s) {
    detail::require_same_size(heldout_.size(), static_cast<std::size_t>(s.beta.cols()), "sample documents");
    for (std::size_t n = 0; n < heldout_.size(); ++n) {
      const auto nn = static_cast<Eigen::Index>(n);
      const auto& words = heldout_.documents[n].words;
      for (Eigen::Index k = 0; k < s.topics.rows(); ++k) {
        if (!s.r(k, nn)) continue;
        const double scale = s.masses[static_cast<std::size_t>(k)] * s.beta(k, nn);
        denominators_[n] += scale * s.topics.row(k).sum();
        for (std::size_t i = 0; i < words.size(); ++i) {
          numerators_[offsets_[n] + i] += scale * s.topics(k, words[i].word);
        }
      }
    }
    ++samples_;
  }

  std::size_t samples() const { return samples_; }

  double value() const {
    if (samples_ == 0) throw UsageError("perplexity needs at least one posterior sample");
    double total = 0.0, tokens = 0.0;
    for (std::size_t n = 0; n < heldout_.size(); ++n) {
      const auto& words = heldout_.documents[n].words;
      for (std::size_t i = 0; i < words.size(); ++i) {
        total += words[i].count * (std::log(numerators_[offsets_[n] + i]) - std::log(denominators_[n]));
        tokens += words[i].count;
      }
    }
    return std::exp(-total / tokens);
  }

 private:
  const Corpus& heldout_;
  std::vector<std::size_t> offsets_;
  std::vector<double> numerators_;
  std::vector<double> denominators_;
  std::size_t samples_ = 0;
};

inline double perplexity(std::span<const TopicSample> samples, const Corpus& heldout) {
  PerplexityAccumulator acc(heldout);
  for (const auto& s : samples) acc.add(s);
  return acc.value();
}

// ---------------------------------------------------------------------------
// Decade prediction

/// Scores a document against candidate decades, each a set of timestamps, by
/// the Poisson log-likelihood under predictive_rate at the decade's best
/// timestamp. Ties go to the earliest decade.
class DecadePredictor {
 public:
  DecadePredictor(std::span<const TopicSample> samples, std::span<const double> timestamps,
                  std::vector<std::vector<std::size_t>> decades)
      : decades_(std::move(decades)) {
    if (decades_.empty()) throw UsageError("need at least one candidate decade");
    for (const auto& d : decades_) {
      if (d.empty()) throw UsageError("candidate decades must contain a timestamp");
      for (std::size_t t : d) {
        if (t >= timestamps.size()) throw DimensionError("decade timestamp outside the set");
      }
    }
    for (double t : timestamps) {
      Eigen::VectorXd rate = predictive_rate(samples, t);
      totals_.push_back(rate.sum());
      log_rates_.push_back(rate.array().log().matrix());
    }
  }

  /// Log-likelihood up to a document-only constant, per decade.
  std::vector<double> scores(const Document& doc) const {
    std::vector<double> out;
    for (const auto& d : decades_) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t t : d) {
        double ll = -totals_[t];
        for (const auto& w : doc.words) ll += w.count * log_rates_[t][w.word];
        best = std::max(best, ll);
      }
      out.push_back(best);
    }
    return out;
  }

  std::size_t predict(const Document& doc) const {
    const auto s = scores(doc);
    return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  }

 private:
  std::vector<std::vector<std::size_t>> decades_;
  std::vector<double> totals_;
  std::vector<Eigen::VectorXd> log_rates_;
};

inline std::size_t decade_predict(std::span<const TopicSample> samples, std::span<const double> timestamps,
                                  std::vector<std::vector<std::size_t>> decades, const Document& doc) {
  return DecadePredictor(samples, timestamps, std::move(decades)).predict(doc);
}

// ---------------------------------------------------------------------------
// Scores

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  detail::require_same_size(pred.size(), truth.size(), "rmse");
  if (pred.empty()) throw UsageError("rmse of an empty vector");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.array() - a.mean();
  const Eigen::VectorXd y = b.array() - b.mean();
  const double den = std::sqrt(x.squaredNorm() * y.squaredNorm());
  return den > 0.0 ? x.dot(y) / den : 0.0;
}

/// Maximum-total-score one-to-one matching of rows to columns. Returns, for
/// each row, the matched column (or -1 when there are more rows than columns).
inline std::vector<long> match_assignment(const Eigen::MatrixXd& score) {
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS, boost::no_property,
                                      boost::property<boost::edge_weight_t, long>>;
  const auto rows = static_cast<std::size_t>(score.rows()), cols = static_cast<std::size_t>(score.cols());
  Graph g(rows + cols);
  const double lo = score.size() ? score.minCoeff() : 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      // shifted positive so that every row is matched when possible
      const long w = std::lround((score(i, j) - lo + 1.0) * 1e6);
      boost::add_edge(i, rows + j, w, g);
    }
  }
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(rows + cols);
  boost::maximum_weighted_matching(g, &mate[0]);
  std::vector<long> out(rows, -1);
  for (std::size_t i = 0; i < rows; ++i) {
    if (mate[i] != boost::graph_traits<Graph>::null_vertex()) out[i] = static_cast<long>(mate[i] - rows);
  }
  return out;
}

struct FeatureRecovery {
  std::vector<long> match;            // learned feature per true feature
  std::vector<double> correlations;   // per true feature
  double mean_correlation = 0.0;
  double curve_rmse = 0.0;            // over matched curves and the grid
};

/// Matches learned features to true ones by correlation, then scores the
/// matched thinning curves.
inline FeatureRecovery score_feature_recovery(const Eigen::MatrixXd& true_features,
                                              const Eigen::MatrixXd& learned_features,
                                              const Eigen::MatrixXd& true_curves,
                                              const Eigen::MatrixXd& learned_curves) {
  Eigen::MatrixXd corr(true_features.rows(), learned_features.rows());
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    for (Eigen::Index j = 0; j < corr.cols(); ++j) {
      corr(i, j) = pearson(true_features.row(i).transpose(), learned_features.row(j).transpose());
    }
  }
  FeatureRecovery out;
  out.match = match_assignment(corr);
  double ss = 0.0, count = 0.0;
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    const long j = out.match[static_cast<std::size_t>(i)];
    if (j < 0) {
      out.correlations.push_back(0.0);
      ss += true_curves.row(i).squaredNorm();
    } else {
      out.correlations.push_back(corr(i, j));
      ss += (true_curves.row(i) - learned_curves.row(j)).squaredNorm();
    }
    count += static_cast<double>(true_curves.cols());
  }
  for (double c : out.correlations) out.mean_correlation += c / static_cast<double>(out.correlations.size());
  out.curve_rmse = std::sqrt(ss / count);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Kernel with weights omega_l ~ kappa delta_0 + (1 - kappa) N(0, slab_variance),
/// kappa ~ Be(1, 1), one weight per center plus the intercept.
inline ProbitRvmKernel<double> draw_spike_slab_kernel(std::vector<double> centers, double width,
                                                      double slab_variance, Rng& rng) {
  const double kappa = uniform01(rng);
  ProbitRvmKernel<double> k{std::vector<double>(centers.size() + 1), width, std::move(centers)};
  for (auto& w : k.weights) w = bernoulli(rng, kappa) ? 0.0 : normal(rng, 0.0, std::sqrt(slab_variance));
  return k;
}

struct BagOfItemsOptions {
  std::size_t features = 8;
  std::size_t side = 8;  // images are side x side
  std::size_t covariates = 20;
  std::size_t points_per_covariate = 100;
  double noise_variance = 0.25;
  double width = 0.02;
  double slab_variance = 4.0;
  double mass = 0.5;
  std::size_t max_redraws = 1000;  // per feature, until some point carries it
};

struct BagOfItems {
  LfmTruth truth;
  LfmDraw draw;
  Eigen::MatrixXd curves;  // features x covariates
};

/// Feature k lights row k and column k of a side x side image, covariates
/// are 1..T on the real line, kernels are spike-and-slab RVM expansions.
/// A feature no point carries gets a fresh kernel and the data are redrawn.
inline BagOfItems generate_bag_of_items(Rng& rng, const BagOfItemsOptions& o = {}) {
  if (o.features > o.side) throw ParameterError("one row and column per feature");
  BagOfItems out;
  const std::size_t d = o.side * o.side;
  out.truth.features = Eigen::MatrixXd::Zero(o.features, d);
  for (std::size_t k = 0; k < o.features; ++k) {
    for (std::size_t i = 0; i < o.side; ++i) {
      out.truth.features(k, k * o.side + i) = 1.0;
      out.truth.features(k, i * o.side + k) = 1.0;
    }
  }
  std::vector<double> grid(o.covariates);
  for (std::size_t t = 0; t < o.covariates; ++t) grid[t] = static_cast<double>(t + 1);
  out.truth.masses.assign(o.features, o.mass);
  for (std::size_t k = 0; k < o.features; ++k) {
    out.truth.kernels.push_back(draw_spike_slab_kernel(grid, o.width, o.slab_variance, rng));
  }
  out.truth.noise_variance = o.noise_variance;
  const std::vector<std::size_t> counts(o.covariates, o.points_per_covariate);
  for (std::size_t attempt = 0;; ++attempt) {
    out.draw = lfm_generate(out.truth, grid, counts, rng);
    bool redraw = false;
    for (std::size_t k = 0; k < o.features; ++k) {
      if (out.draw.z.row(static_cast<Eigen::Index>(k)).cast<int>().sum() > 0) continue;
      out.truth.kernels[k] = draw_spike_slab_kernel(grid, o.width, o.slab_variance, rng);
      redraw = true;
    }
    if (!redraw) break;
    if (attempt + 1 >= o.max_redraws) throw NumericalError("could not draw data carrying every feature");
  }
  out.curves.resize(o.features, o.covariates);
  for (std::size_t k = 0; k < o.features; ++k) {
    for (std::size_t t = 0; t < o.covariates; ++t) {
      out.curves(k, t) = thinning_probability(out.truth.kernels[k], grid[t]);
    }
  }
  return out;
}

struct SyntheticCorpusOptions {
  double alpha = 0.1;        // Dirichlet parameter of the true topics
  double rate_shape = 5.0;   // pi_k ~ Ga(rate_shape, rate_rate)
  double rate_rate = 0.1;
  double e = 1.0;
  double width = 0.05;
  double slab_variance = 4.0;
};

struct SyntheticCorpus {
  Corpus corpus;
  Eigen::MatrixXd topics;  // K x P
  std::vector<double> masses;
  std::vector<ProbitRvmKernel<double>> kernels;
  BinaryIndicators r;
  Eigen::MatrixXd beta;
  std::vector<std::vector<std::uint32_t>> allocations;  // per document, words x K
};

/// Forward simulation of the thinned gamma-process Poisson factor model on
/// timestamps 1..T with `docs_per_t` documents each. A document that comes
/// out empty is redrawn.
inline SyntheticCorpus generate_synthetic_corpus(std::size_t K, std::size_t P, std::size_t T,
                                                 std::size_t docs_per_t, Rng& rng,
                                                 const SyntheticCorpusOptions& o = {}) {
  if (K == 0 || P == 0 || T == 0 || docs_per_t == 0) throw ParameterError("sizes must be positive");
  SyntheticCorpus out;
  out.corpus.vocabulary_size = P;
  for (std::size_t t = 0; t < T; ++t) out.corpus.timestamps.push_back(static_cast<double>(t + 1));
  out.topics.resize(K, P);
  const std::vector<double> alpha(P, o.alpha);
  std::vector<double> theta(P);
  for (std::size_t k = 0; k < K; ++k) {
    dirichlet(rng, alpha, theta);
    for (std::size_t p = 0; p < P; ++p) out.topics(k, p) = theta[p];
    out.masses.push_back(gamma(rng, o.rate_shape, o.rate_rate));
    out.kernels.push_back(draw_spike_slab_kernel(out.corpus.timestamps, o.width, o.slab_variance, rng));
  }
  const std::size_t N = T * docs_per_t;
  out.r.resize(K, N);
  out.beta.resize(K, N);
  std::vector<std::uint32_t> dense(P * K);
  for (std::size_t t = 0, n = 0; t < T; ++t) {
    std::vector<double> p(K);
    for (std::size_t k = 0; k < K; ++k) p[k] = thinning_probability(out.kernels[k], out.corpus.timestamps[t]);
    for (std::size_t i = 0; i < docs_per_t; ++i, ++n) {
      const auto nn = static_cast<Eigen::Index>(n);
      Document doc{"doc" + std::to_string(n), t, {}};
      std::vector<std::uint32_t> alloc;
      while (doc.words.empty()) {
        std::fill(dense.begin(), dense.end(), 0u);
        for (std::size_t k = 0; k < K; ++k) {
          const auto kk = static_cast<Eigen::Index>(k);
          out.r(kk, nn) = bernoulli(rng, p[k]) ? 1 : 0;
          out.beta(kk, nn) = gamma(rng, o.e, 1.0);
          if (!out.r(kk, nn)) continue;
          const double scale = out.masses[k] * out.beta(kk, nn);
          for (std::size_t w = 0; w < P; ++w) {
            dense[w * K + k] = static_cast<std::uint32_t>(poisson(rng, scale * out.topics(kk, w)));
          }
        }
        alloc.clear();
        for (std::size_t w = 0; w < P; ++w) {
          std::uint32_t total = 0;
          for (std::size_t k = 0; k < K; ++k) total += dense[w * K + k];
          if (total == 0) continue;
          doc.words.push_back({static_cast<std::uint32_t>(w), total});
          alloc.insert(alloc.end(), dense.begin() + static_cast<std::ptrdiff_t>(w * K),
                       dense.begin() + static_cast<std::ptrdiff_t>((w + 1) * K));
        }
      }
      out.corpus.documents.push_back(std::move(doc));
      out.allocations.push_back(std::move(alloc));
    }
  }
  return out;
}

}  // namespace tcrm
