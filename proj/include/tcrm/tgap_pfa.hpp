// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tcrm/crm.hpp"
#include "tcrm/error.hpp"
#include "tcrm/random.hpp"
#include "tcrm/special_functions.hpp"
#include "tcrm/thinning.hpp"

namespace tcrm {

// ---------------------------------------------------------------------------
// Corpus

struct WordCount {
  std::uint32_t word = 0;
  std::uint32_t count = 0;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

struct Document {
  std::string id;
  std::size_t timestamp = 0;  // index into Corpus::timestamps
  std::vector<WordCount> words;  // sorted by word, counts > 0

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& w : words) n += w.count;
    return n;
  }
};

/// Sparse timestamped document-term counts. Timestamps are the distinct
/// covariate values, sorted ascending.
struct Corpus {
  std::size_t vocabulary_size = 0;
  std::vector<double> timestamps;
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& d : documents) n += d.total();
    return n;
  }

  void validate() const {
    if (vocabulary_size == 0) throw ParameterError("vocabulary must be nonempty");
    if (!std::is_sorted(timestamps.begin(), timestamps.end()) ||
        std::adjacent_find(timestamps.begin(), timestamps.end()) != timestamps.end()) {
      throw ParameterError("timestamps must be distinct and sorted");
    }
    for (const auto& d : documents) {
      if (d.timestamp >= timestamps.size()) throw DimensionError("document timestamp outside the set");
      for (std::size_t i = 0; i < d.words.size(); ++i) {
        if (d.words[i].word >= vocabulary_size) throw DimensionError("word id outside the vocabulary");
        if (d.words[i].count == 0) throw ParameterError("stored counts must be positive");
        if (i > 0 && d.words[i - 1].word >= d.words[i].word) {
          throw ParameterError("document words must be sorted and unique");
        }
      }
    }
  }

  /// Documents per timestamp.
  std::vector<std::size_t> counts_per_timestamp() const {
    std::vector<std::size_t> out(timestamps.size(), 0);
    for (const auto& d : documents) ++out[d.timestamp];
    return out;
  }
};

// ---------------------------------------------------------------------------
// State

struct TopicConfig {
  std::size_t truncation = 100;
  bool dynamic = true;  // false: static model with every r fixed at 1
  double alpha_theta = 0.05;
  double e = 1.0;
  double gamma_mass = 1.0;
  double gamma_rate = 1.0;
  double c0 = 1.0;
  double d0 = 1.0;
  std::vector<double> widths{0.01, 0.03, 0.1, 0.3, 1.0};

  void validate() const {
    if (truncation < 1) throw ParameterError("truncation must be positive");
    if (!(alpha_theta > 0.0)) throw ParameterError("alpha_theta must be positive");
    if (!(e > 0.0)) throw ParameterError("e must be positive");
    LevySpec{GammaProcess{gamma_mass, gamma_rate}, truncation}.validate();
    RvmPrior{c0, d0, widths, {}}.validate();
  }

  LevySpec levy() const { return LevySpec{GammaProcess{gamma_mass, gamma_rate}, truncation}; }
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using BinaryIndicators = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Gibbs state. Atom k carries the rate pi_k, the topic theta_k (a point on
/// the P-simplex) and its kernel. Allocations are stored per document as a
/// (words x K) row-major block aligned with Document::words.
struct TopicState {
  TruncatedCRM<std::vector<double>, ProbitRvmKernel<double>> crm;
  std::vector<RvmPrior> priors;
  BinaryIndicators r;    // K x N
  Eigen::MatrixXd beta;  // K x N
  std::vector<std::vector<std::uint32_t>> allocations;
  CountMatrix topic_word;  // K x P, sum over documents
  CountMatrix doc_topic;   // K x N, sum over words

  std::size_t topics() const { return crm.size(); }

  std::uint32_t allocation(std::size_t n, std::size_t i, std::size_t k) const {
    return allocations[n][i * topics() + k];
  }

  std::int64_t topic_total(std::size_t k) const {
    return doc_topic.row(static_cast<Eigen::Index>(k)).sum();
  }

  /// Topics holding any allocated count.
  std::size_t active_topics() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < topics(); ++k) n += topic_total(k) > 0 ? 1 : 0;
    return n;
  }

  void refresh_counts(const Corpus& corpus) {
    const std::size_t K = topics();
    topic_word = CountMatrix::Zero(K, corpus.vocabulary_size);
    doc_topic = CountMatrix::Zero(K, corpus.size());
    for (std::size_t n = 0; n < corpus.size(); ++n) {
      const auto& words = corpus.documents[n].words;
      for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t k = 0; k < K; ++k) {
          const std::int64_t c = allocation(n, i, k);
          topic_word(k, words[i].word) += c;
          doc_topic(k, n) += c;
        }
      }
    }
  }

  /// Conservation, support, simplex and positivity checks.
  void check_invariants(const Corpus& corpus) const {
    const std::size_t K = topics();
    for (std::size_t k = 0; k < K; ++k) {
      const auto& theta = crm.atoms[k].theta;
      double sum = 0.0;
      for (double v : theta) {
        if (!(v > 0.0)) throw InvariantViolation("topic entries must be positive");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw InvariantViolation("topic does not sum to one");
      if (!(crm.atoms[k].mass > 0.0)) throw InvariantViolation("topic rate must be positive");
    }
    for (std::size_t n = 0; n < corpus.size(); ++n) {
      const auto& words = corpus.documents[n].words;
      if (allocations[n].size() != words.size() * K) throw InvariantViolation("allocation shape");
      bool any = false;
      for (std::size_t k = 0; k < K; ++k) {
        const auto kk = static_cast<Eigen::Index>(k), nn = static_cast<Eigen::Index>(n);
        if (!(beta(kk, nn) > 0.0)) throw InvariantViolation("document rate must be positive");
        any = any || r(kk, nn);
      }
      for (std::size_t i = 0; i < words.size(); ++i) {
        std::uint64_t sum = 0;
        for (std::size_t k = 0; k < K; ++k) {
          const auto c = allocation(n, i, k);
          if (c > 0 && !r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n))) {
            throw InvariantViolation("count allocated to a thinned topic");
          }
          sum += c;
        }
        if (sum != words[i].count) throw InvariantViolation("allocations do not conserve counts");
      }
      if (!words.empty() && !any) throw InvariantViolation("document has no active topic");
    }
  }
};

/// Masses of the three sub-cases of an indicator whose topic holds no counts
/// in the document: (r = 1, u = 0), (r = 0, u > 0), (r = 0, u = 0), for
/// thinning probability p and fictitious Poisson rate R. Normalized.
inline std::array<double, 3> indicator_case_masses(double p, double rate) {
  const double stay = std::exp(-rate);
  std::array<double, 3> m{p * stay, (1.0 - p) * -std::expm1(-rate), (1.0 - p) * stay};
  const double total = m[0] + m[1] + m[2];
  for (double& v : m) v /= total;
  return m;
}

// ---------------------------------------------------------------------------
// Conditional updates

/// Splits every count w_pnt across topics with weights theta_pk r pi beta.
inline void sample_allocations(TopicState& s, const Corpus& corpus, Rng& rng) {
  const std::size_t K = s.topics();
  std::vector<double> rate(K);
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto nn = static_cast<Eigen::Index>(n);
    const auto& words = corpus.documents[n].words;
    auto& alloc = s.allocations[n];
    alloc.assign(words.size() * K, 0u);
    std::vector<double> scale(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      scale[k] = s.r(kk, nn) ? s.crm.atoms[k].mass * s.beta(kk, nn) : 0.0;
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t k = 0; k < K; ++k) rate[k] = scale[k] * s.crm.atoms[k].theta[words[i].word];
      multinomial<std::uint32_t>(rng, words[i].count, rate,
                                 std::span<std::uint32_t>(alloc.data() + i * K, K));
    }
  }
  s.refresh_counts(corpus);
}

/// Per-document indicators, scanning k in order. A topic holding counts stays
/// on; a nonempty document whose other topics are all off keeps k on;
/// otherwise r is drawn from the three sub-case masses with R = pi_k beta_k.
inline void sample_indicators(TopicState& s, const Corpus& corpus, const TopicConfig& cfg, Rng& rng) {
  const std::size_t K = s.topics();
  if (!cfg.dynamic) {
    s.r.setOnes();
    return;
  }
  std::vector<double> p(K);
  std::size_t last_t = corpus.timestamps.size();
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto nn = static_cast<Eigen::Index>(n);
    const auto& doc = corpus.documents[n];
    if (doc.timestamp != last_t) {
      for (std::size_t k = 0; k < K; ++k) {
        p[k] = thinning_probability(s.crm.atoms[k].location, corpus.timestamps[doc.timestamp]);
      }
      last_t = doc.timestamp;
    }
    const bool nonempty = !doc.words.empty();
    std::size_t on = static_cast<std::size_t>(s.r.col(nn).cast<int>().sum());
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const std::size_t others = on - s.r(kk, nn);
      std::uint8_t next;
      if (s.doc_topic(kk, nn) > 0 || (nonempty && others == 0)) {
        next = 1;
      } else {
        const auto m = indicator_case_masses(p[k], s.crm.atoms[k].mass * s.beta(kk, nn));
        next = categorical(rng, m) == 0 ? 1 : 0;
      }
      on = others + next;
      s.r(kk, nn) = next;
    }
  }
}

/// theta_k ~ Dir(alpha_theta + topic_word(k, .)).
inline void sample_topics(TopicState& s, const TopicConfig& cfg, Rng& rng) {
  const auto P = s.topic_word.cols();
  std::vector<double> alpha(static_cast<std::size_t>(P));
  for (std::size_t k = 0; k < s.topics(); ++k) {
    for (Eigen::Index p = 0; p < P; ++p) {
      alpha[p] = cfg.alpha_theta + static_cast<double>(s.topic_word(static_cast<Eigen::Index>(k), p));
    }
    auto& theta = s.crm.atoms[k].theta;
    theta.resize(alpha.size());
    dirichlet(rng, alpha, theta);
  }
}

/// pi_k ~ Ga(gamma/K + sum w~_k, lambda + sum_n r beta).
inline void sample_pi(TopicState& s, const TopicConfig& cfg, Rng& rng) {
  const double K = static_cast<double>(s.topics());
  for (std::size_t k = 0; k < s.topics(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double exposure = (s.r.row(kk).cast<double>().array() * s.beta.row(kk).array()).sum();
    s.crm.atoms[k].mass = gamma(rng, cfg.gamma_mass / K + static_cast<double>(s.topic_total(k)),
                                cfg.gamma_rate + exposure);
  }
}

/// beta_k^n ~ Ga(w~_{.nk} + e, r pi + 1), including thinned topics.
inline void sample_beta(TopicState& s, const TopicConfig& cfg, Rng& rng) {
  for (Eigen::Index n = 0; n < s.beta.cols(); ++n) {
    for (Eigen::Index k = 0; k < s.beta.rows(); ++k) {
      const double rate = 1.0 + (s.r(k, n) ? s.crm.atoms[static_cast<std::size_t>(k)].mass : 0.0);
      s.beta(k, n) = gamma(rng, static_cast<double>(s.doc_topic(k, n)) + cfg.e, rate);
    }
  }
}

/// Indicator observations of topic k pooled per timestamp.
inline std::vector<RvmObservation<double>> topic_rvm_observations(const TopicState& s, std::size_t k,
                                                                  const Corpus& corpus) {
  std::vector<RvmObservation<double>> obs(corpus.timestamps.size());
  for (std::size_t t = 0; t < obs.size(); ++t) obs[t].covariate = corpus.timestamps[t];
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    auto& o = obs[corpus.documents[n].timestamp];
    if (s.r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n))) {
      ++o.active;
    } else {
      ++o.inactive;
    }
  }
  return obs;
}

inline void sample_topic_kernels(TopicState& s, const Corpus& corpus, Rng& rng) {
  for (std::size_t k = 0; k < s.topics(); ++k) {
    const auto obs = topic_rvm_observations(s, k, corpus);
    rvm_gibbs_block(std::span<const RvmObservation<double>>(obs), s.crm.atoms[k].location,
                    s.priors[k], rng);
  }
}

/// allocations, indicators, topics, pi, beta, then the RVM block.
inline void gibbs_sweep(TopicState& s, const Corpus& corpus, const TopicConfig& cfg, Rng& rng) {
  sample_allocations(s, corpus, rng);
  sample_indicators(s, corpus, cfg, rng);
  sample_topics(s, cfg, rng);
  sample_pi(s, cfg, rng);
  sample_beta(s, cfg, rng);
  if (cfg.dynamic) sample_topic_kernels(s, corpus, rng);
}

// ---------------------------------------------------------------------------
// Prior, initialization, likelihood

namespace detail {

inline TopicState topic_prior_parameters(const Corpus& corpus, const TopicConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t K = cfg.truncation, N = corpus.size();
  TopicState s;
  s.priors.assign(K, RvmPrior{cfg.c0, cfg.d0, cfg.widths, {}});
  std::size_t k = 0;
  const std::vector<double> alpha(corpus.vocabulary_size, cfg.alpha_theta);
  const auto theta = [&](Rng& r) {
    std::vector<double> out(alpha.size());
    dirichlet(r, alpha, out);
    return out;
  };
  const auto location = [&](Rng& r) {
    auto& prior = s.priors[k++];
    if (!cfg.dynamic) return ProbitRvmKernel<double>{{0.0}, prior.width_dictionary[0], {}};
    return sample_rvm_kernel(corpus.timestamps, prior, r);
  };
  s.crm = draw_truncated_crm(cfg.levy(), theta, location, rng);
  s.r = BinaryIndicators::Ones(K, N);
  s.beta.resize(K, N);
  for (std::size_t n = 0; n < N; ++n) {
    const double t = corpus.timestamps[corpus.documents[n].timestamp];
    for (std::size_t j = 0; j < K; ++j) {
      const auto jj = static_cast<Eigen::Index>(j), nn = static_cast<Eigen::Index>(n);
      if (cfg.dynamic) s.r(jj, nn) = bernoulli(rng, thinning_probability(s.crm.atoms[j].location, t)) ? 1 : 0;
      s.beta(jj, nn) = gamma(rng, cfg.e, 1.0);
    }
  }
  return s;
}

}  // namespace detail

/// Redraws every document's counts from w~_pk ~ Pois(theta_pk r pi beta)
/// and stores the draws as the allocations.
inline void topic_regenerate(TopicState& s, Corpus& corpus, Rng& rng) {
  const std::size_t K = s.topics(), P = corpus.vocabulary_size;
  std::vector<std::uint32_t> dense(P * K);
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto nn = static_cast<Eigen::Index>(n);
    std::fill(dense.begin(), dense.end(), 0u);
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (!s.r(kk, nn)) continue;
      const double scale = s.crm.atoms[k].mass * s.beta(kk, nn);
      for (std::size_t p = 0; p < P; ++p) {
        dense[p * K + k] = static_cast<std::uint32_t>(poisson(rng, scale * s.crm.atoms[k].theta[p]));
      }
    }
    auto& doc = corpus.documents[n];
    doc.words.clear();
    auto& alloc = s.allocations[n];
    alloc.clear();
    for (std::size_t p = 0; p < P; ++p) {
      std::uint32_t total = 0;
      for (std::size_t k = 0; k < K; ++k) total += dense[p * K + k];
      if (total == 0) continue;
      doc.words.push_back({static_cast<std::uint32_t>(p), total});
      alloc.insert(alloc.end(), dense.begin() + static_cast<std::ptrdiff_t>(p * K),
                   dense.begin() + static_cast<std::ptrdiff_t>((p + 1) * K));
    }
  }
  s.refresh_counts(corpus);
}

/// Forward draw of every parameter and latent variable from the model, with
/// the corpus counts regenerated in place (document layout is kept).
inline TopicState topic_sample_prior(Corpus& corpus, const TopicConfig& cfg, Rng& rng) {
  TopicState s = detail::topic_prior_parameters(corpus, cfg, rng);
  s.allocations.assign(corpus.size(), {});
  topic_regenerate(s, corpus, rng);
  return s;
}

/// Starting state for a fit: kernels from the prior, every indicator on,
/// allocations uniform over topics, then topics, pi and beta from their
/// conditionals.
inline TopicState topic_init(const Corpus& corpus, const TopicConfig& cfg, Rng& rng) {
  corpus.validate();
  TopicState s = detail::topic_prior_parameters(corpus, cfg, rng);
  const std::size_t K = s.topics();
  s.r.setOnes();
  const std::vector<double> uniform(K, 1.0);
  s.allocations.assign(corpus.size(), {});
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto& words = corpus.documents[n].words;
    s.allocations[n].assign(words.size() * K, 0u);
    for (std::size_t i = 0; i < words.size(); ++i) {
      multinomial<std::uint32_t>(rng, words[i].count, uniform,
                                 std::span<std::uint32_t>(s.allocations[n].data() + i * K, K));
    }
  }
  s.refresh_counts(corpus);
  sample_topics(s, cfg, rng);
  sample_pi(s, cfg, rng);
  sample_beta(s, cfg, rng);
  return s;
}

/// Poisson log-likelihood of the observed counts given (theta, pi, r, beta).
inline double topic_log_likelihood(const TopicState& s, const Corpus& corpus) {
  double ll = 0.0;
  const std::size_t K = s.topics();
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto nn = static_cast<Eigen::Index>(n);
    std::vector<double> scale(K);
    double total_rate = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      scale[k] = s.r(kk, nn) ? s.crm.atoms[k].mass * s.beta(kk, nn) : 0.0;
      total_rate += scale[k];
    }
    ll -= total_rate;
    for (const auto& w : corpus.documents[n].words) {
      double rate = 0.0;
      for (std::size_t k = 0; k < K; ++k) rate += scale[k] * s.crm.atoms[k].theta[w.word];
      ll += w.count * std::log(rate) - std::lgamma(w.count + 1.0);
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Posterior samples and prediction

/// The parts of a state needed for held-out evaluation.
struct TopicSample {
  Eigen::MatrixXd topics;  // K x P
  std::vector<double> masses;
  std::vector<ProbitRvmKernel<double>> kernels;
  BinaryIndicators r;
  Eigen::MatrixXd beta;
  double e = 1.0;
  bool dynamic = true;
};

inline TopicSample make_topic_sample(const TopicState& s, const TopicConfig& cfg) {
  TopicSample out;
  const std::size_t K = s.topics();
  const std::size_t P = K > 0 ? s.crm.atoms[0].theta.size() : 0;
  out.topics.resize(K, P);
  for (std::size_t k = 0; k < K; ++k) {
    out.masses.push_back(s.crm.atoms[k].mass);
    out.kernels.push_back(s.crm.atoms[k].location);
    for (std::size_t p = 0; p < P; ++p) out.topics(k, p) = s.crm.atoms[k].theta[p];
  }
  out.r = s.r;
  out.beta = s.beta;
  out.e = cfg.e;
  out.dynamic = cfg.dynamic;
  return out;
}

/// Expected word rates of a new document at covariate t, averaged over
/// samples: sum_k theta_pk pi_k p_k(t) e, with r and beta integrated out.
inline Eigen::VectorXd predictive_rate(std::span<const TopicSample> samples, double t) {
  if (samples.empty()) throw UsageError("prediction needs at least one posterior sample");
  Eigen::VectorXd rate = Eigen::VectorXd::Zero(samples[0].topics.cols());
  for (const auto& s : samples) {
    detail::require_same_size(static_cast<std::size_t>(rate.size()),
                              static_cast<std::size_t>(s.topics.cols()), "vocabulary");
    for (Eigen::Index k = 0; k < s.topics.rows(); ++k) {
      const double p = s.dynamic ? thinning_probability(s.kernels[static_cast<std::size_t>(k)], t) : 1.0;
      rate += (s.masses[static_cast<std::size_t>(k)] * p * s.e) * s.topics.row(k).transpose();
    }
  }
  return rate / static_cast<double>(samples.size());
}

}  // namespace tcrm
