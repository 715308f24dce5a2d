// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "tcrm/geweke.hpp"
#include "tcrm/tgap_pfa.hpp"

namespace tcrm {
namespace {

Corpus layout(std::vector<double> timestamps, std::size_t docs_per_t, std::size_t P) {
  Corpus c;
  c.vocabulary_size = P;
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    for (std::size_t i = 0; i < docs_per_t; ++i) {
      c.documents.push_back({"d" + std::to_string(t) + "_" + std::to_string(i), t, {}});
    }
  }
  c.timestamps = std::move(timestamps);
  return c;
}

ProbitRvmKernel<double> constant_kernel(double activation) {
  return ProbitRvmKernel<double>{{activation}, 1.0, {}};
}

// Hand-built state: K topics over P words, every indicator on, unit rates.
TopicState manual_state(const Corpus& corpus, std::vector<std::vector<double>> topics,
                        std::vector<double> masses) {
  TopicState s;
  const std::size_t K = masses.size();
  s.crm.spec = LevySpec{GammaProcess{}, K};
  for (std::size_t k = 0; k < K; ++k) s.crm.atoms.push_back({masses[k], topics[k], constant_kernel(0.0)});
  s.priors.assign(K, RvmPrior{});
  s.r = BinaryIndicators::Ones(K, corpus.size());
  s.beta = Eigen::MatrixXd::Ones(K, corpus.size());
  s.allocations.resize(corpus.size());
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    s.allocations[n].assign(corpus.documents[n].words.size() * K, 0u);
  }
  s.refresh_counts(corpus);
  return s;
}

TEST(Corpus, ValidationCatchesMalformedInput) {
  auto c = layout({1.0, 2.0}, 1, 3);
  c.documents[0].words = {{0, 2}, {2, 1}};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.total(), 3u);
  c.documents[0].words = {{2, 1}, {0, 2}};
  EXPECT_THROW(c.validate(), ParameterError);
  c.documents[0].words = {{3, 1}};
  EXPECT_THROW(c.validate(), DimensionError);
  c.documents[0].words = {{0, 0}};
  EXPECT_THROW(c.validate(), ParameterError);
  c.documents[0].words = {};
  c.timestamps = {2.0, 1.0};
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(SampleAllocations, SingleActiveTopicTakesEverything) {
  auto c = layout({0.0}, 1, 2);
  c.documents[0].words = {{0, 5}, {1, 2}};
  auto s = manual_state(c, {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, {1.0, 1.0, 1.0});
  s.r(0, 0) = 0;
  s.r(2, 0) = 0;
  Rng rng(1);
  sample_allocations(s, c, rng);
  EXPECT_EQ(s.allocation(0, 0, 1), 5u);
  EXPECT_EQ(s.allocation(0, 1, 1), 2u);
  EXPECT_EQ(s.doc_topic(0, 0) + s.doc_topic(2, 0), 0);
  EXPECT_NO_THROW(s.check_invariants(c));
}

TEST(SampleAllocations, MultinomialMeanForRatesTwoOneOne) {
  auto c = layout({0.0}, 1, 1);
  c.documents[0].words = {{0, 6}};
  auto s = manual_state(c, {{1.0}, {1.0}, {1.0}}, {2.0, 1.0, 1.0});
  Rng rng(2);
  const int draws = 100000;
  std::array<double, 3> sum{};
  for (int i = 0; i < draws; ++i) {
    sample_allocations(s, c, rng);
    for (std::size_t k = 0; k < 3; ++k) sum[k] += s.allocation(0, 0, k);
    ASSERT_EQ(s.allocation(0, 0, 0) + s.allocation(0, 0, 1) + s.allocation(0, 0, 2), 6u);
  }
  const std::array<double, 3> expected{3.0, 1.5, 1.5};
  const std::array<double, 3> var{6 * 0.5 * 0.5, 6 * 0.25 * 0.75, 6 * 0.25 * 0.75};
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(sum[k] / draws, expected[k], 4 * std::sqrt(var[k] / draws));
  }
}

TEST(SampleAllocations, AllThinnedNonemptyDocumentIsAnInvariantViolation) {
  auto c = layout({0.0}, 1, 1);
  c.documents[0].words = {{0, 1}};
  auto s = manual_state(c, {{1.0}}, {1.0});
  s.r.setZero();
  Rng rng(3);
  EXPECT_THROW(sample_allocations(s, c, rng), InvariantViolation);
}

TEST(SampleTopics, EmptyAllocationsGiveSymmetricPrior) {
  auto c = layout({0.0}, 1, 997);
  TopicConfig cfg;
  auto s = manual_state(c, {std::vector<double>(997, 1.0 / 997)}, {1.0});
  Rng rng(4);
  double first = 0.0;
  const int draws = 2000;
  for (int i = 0; i < draws; ++i) {
    sample_topics(s, cfg, rng);
    const auto& th = s.crm.atoms[0].theta;
    ASSERT_NEAR(std::accumulate(th.begin(), th.end(), 0.0), 1.0, 1e-12);
    first += th[0];
  }
  // Dir(0.05 * 1): Var theta_1 = (1/P)(1 - 1/P) / (P alpha + 1).
  const double var = (1.0 / 997) * (1 - 1.0 / 997) / (997 * 0.05 + 1);
  EXPECT_NEAR(first / draws, 1.0 / 997, 4 * std::sqrt(var / draws));
}

TEST(SampleTopics, PosteriorAddsColumnSums) {
  auto c = layout({0.0}, 1, 3);
  c.documents[0].words = {{0, 10000}};
  TopicConfig cfg;
  auto s = manual_state(c, {{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {1.0});
  s.allocations[0] = {10000};
  s.refresh_counts(c);
  Rng rng(5);
  double sum = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    sample_topics(s, cfg, rng);
    sum += s.crm.atoms[0].theta[0];
  }
  const double mean = 10000.05 / 10000.15;
  const double var = mean * (1 - mean) / 10001.15;
  EXPECT_NEAR(sum / draws, mean, 4 * std::sqrt(var / draws));
  EXPECT_NEAR(mean, 0.99999, 1e-5);
}

// Posterior of pi for a single atom by quadrature of prior times the
// Poisson likelihoods of the per-document totals.
TEST(SamplePi, MatchesBruteForcePosterior) {
  auto c = layout({0.0}, 3, 1);
  c.documents[0].words = {{0, 5}};
  c.documents[1].words = {{0, 7}};
  const std::vector<double> beta{0.5, 1.5, 1.0};
  const std::vector<int> w{5, 7, 0};
  double num = 0.0, den = 0.0, num2 = 0.0;
  for (int i = 1; i < 400000; ++i) {
    const double pi = i * 1e-4;
    double lw = (0.25 - 1) * std::log(pi) - pi;
    for (std::size_t n = 0; n < 3; ++n) lw += w[n] * std::log(pi * beta[n]) - pi * beta[n];
    const double v = std::exp(lw);
    num += pi * v;
    num2 += pi * pi * v;
    den += v;
  }
  const double mean = num / den, var = num2 / den - mean * mean;
  EXPECT_NEAR(mean, 12.25 / 4.0, 1e-3);
  EXPECT_NEAR(var, 12.25 / 16.0, 1e-3);

  TopicConfig cfg;
  cfg.truncation = 4;
  Rng rng(6);
  double sum = 0.0;
  const int draws = 100000;
  // sample_pi divides gamma_mass by the represented atom count, so use a
  // four-atom state whose other atoms are idle.
  auto s4 = manual_state(c, {{1.0}, {1.0}, {1.0}, {1.0}}, {1.0, 1.0, 1.0, 1.0});
  s4.allocations[0] = {5, 0, 0, 0};
  s4.allocations[1] = {7, 0, 0, 0};
  s4.beta.row(0) << 0.5, 1.5, 1.0;
  s4.refresh_counts(c);
  for (int i = 0; i < draws; ++i) {
    sample_pi(s4, cfg, rng);
    sum += s4.crm.atoms[0].mass;
  }
  EXPECT_NEAR(sum / draws, mean, 4 * std::sqrt(var / draws));
}

TEST(SamplePi, ThinnedDocumentsDoNotExposeTheRate) {
  auto c = layout({0.0}, 2, 1);
  TopicConfig cfg;
  auto s = manual_state(c, {{1.0}, {1.0}}, {1.0, 1.0});
  s.beta.setConstant(3.0);
  s.r.setZero();
  Rng rng(7);
  double sum = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    sample_pi(s, cfg, rng);
    sum += s.crm.atoms[1].mass;
  }
  // Ga(1/2, 1): the thinned documents contribute nothing.
  EXPECT_NEAR(sum / draws, 0.5, 4 * std::sqrt(0.5 / draws));
  s.r.setOnes();
  sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    sample_pi(s, cfg, rng);
    sum += s.crm.atoms[1].mass;
  }
  // Ga(1/2, 1 + 6).
  EXPECT_NEAR(sum / draws, 0.5 / 7.0, 4 * std::sqrt(0.5 / 49.0 / draws));
}

TEST(SampleBeta, ConjugateParameters) {
  auto c = layout({0.0}, 2, 1);
  c.documents[0].words = {{0, 7}};
  TopicConfig cfg;
  cfg.e = 1.0;
  auto s = manual_state(c, {{1.0}}, {2.0});
  s.allocations[0] = {7};
  s.refresh_counts(c);
  s.r(0, 1) = 0;
  Rng rng(8);
  double s0 = 0.0, ss0 = 0.0, s1 = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    sample_beta(s, cfg, rng);
    s0 += s.beta(0, 0);
    ss0 += s.beta(0, 0) * s.beta(0, 0);
    s1 += s.beta(0, 1);
  }
  // Ga(8, 3) and the prior Ga(1, 1).
  EXPECT_NEAR(s0 / draws, 8.0 / 3.0, 4 * std::sqrt(8.0 / 9.0 / draws));
  EXPECT_NEAR(ss0 / draws - std::pow(s0 / draws, 2), 8.0 / 9.0, 0.02);
  EXPECT_NEAR(s1 / draws, 1.0, 4 * std::sqrt(1.0 / draws));
}

TEST(IndicatorCases, MassesAndEnumeration) {
  const auto zero = indicator_case_masses(0.5, 0.0);
  EXPECT_DOUBLE_EQ(zero[0], 0.5);
  EXPECT_DOUBLE_EQ(zero[1], 0.0);
  const auto ln2 = indicator_case_masses(0.5, std::log(2.0));
  EXPECT_NEAR(ln2[0], 1.0 / 3.0, 1e-15);

  // Exact (r, u) joint on one word: P(r) Pois(u; R) summed over u.
  for (double p : {0.1, 0.5, 0.9}) {
    for (double R : {0.01, 0.3, 2.0, 7.5}) {
      double on = 0.0, off = 0.0, pmf = std::exp(-R);
      for (int u = 0; u < 200; ++u) {
        if (u == 0) on += p * pmf;
        off += (1 - p) * pmf;
        pmf *= R / (u + 1);
      }
      const auto m = indicator_case_masses(p, R);
      EXPECT_NEAR(m[0], on / (on + off), 1e-12);
      EXPECT_NEAR(m[0] + m[1] + m[2], 1.0, 1e-12);
      for (double v : m) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(SampleIndicators, CaseThreeFrequencyAndCaseTwo) {
  auto c = layout({0.0}, 2, 1);
  c.documents[0].words = {{0, 3}};
  TopicConfig cfg;
  // Topic 0 holds document 0's counts; topic 1 is idle with R = ln 2, p = 0.5.
  auto s = manual_state(c, {{1.0}, {1.0}}, {std::log(2.0), std::log(2.0)});
  s.allocations[0] = {3, 0};
  s.refresh_counts(c);
  Rng rng(9);
  const int draws = 100000;
  int on = 0;
  for (int i = 0; i < draws; ++i) {
    sample_indicators(s, c, cfg, rng);
    ASSERT_EQ(s.r(0, 0), 1);
    on += s.r(1, 0);
  }
  EXPECT_NEAR(on / double(draws), 1.0 / 3.0, 4 * std::sqrt(2.0 / 9.0 / draws));
}

TEST(SampleIndicators, EmptyDocumentsAreNotForcedOn) {
  auto c = layout({0.0}, 1, 1);
  TopicConfig cfg;
  auto s = manual_state(c, {{1.0}, {1.0}}, {1.0, 1.0});
  s.crm.atoms[0].location = constant_kernel(-40.0);
  s.crm.atoms[1].location = constant_kernel(-40.0);
  Rng rng(10);
  sample_indicators(s, c, cfg, rng);
  EXPECT_EQ(s.r(0, 0) + s.r(1, 0), 0);
}

TEST(GibbsSweep, InvariantsAndConservationOverManySweeps) {
  auto c = layout({1, 2, 3, 4, 5}, 6, 30);
  TopicConfig cfg;
  cfg.truncation = 6;
  cfg.alpha_theta = 0.2;
  cfg.widths = {0.05, 0.5};
  Rng rng(11);
  // Data from the model with many expected tokens per document.
  TopicConfig gen = cfg;
  gen.gamma_mass = 60.0;
  topic_sample_prior(c, gen, rng);
  ASSERT_GT(c.total(), 0u);
  const auto before = c.documents;
  auto s = topic_init(c, cfg, rng);
  for (int i = 0; i < 100; ++i) {
    gibbs_sweep(s, c, cfg, rng);
    s.check_invariants(c);
  }
  for (std::size_t n = 0; n < c.size(); ++n) EXPECT_EQ(c.documents[n].words, before[n].words);
  EXPECT_TRUE(std::isfinite(topic_log_likelihood(s, c)));
}

TEST(GibbsSweep, StaticVariantKeepsAllIndicators) {
  auto c = layout({1, 2}, 4, 10);
  TopicConfig cfg;
  cfg.truncation = 3;
  cfg.dynamic = false;
  Rng rng(12);
  TopicConfig gen = cfg;
  gen.gamma_mass = 30.0;
  topic_sample_prior(c, gen, rng);
  auto s = topic_init(c, cfg, rng);
  for (int i = 0; i < 20; ++i) {
    gibbs_sweep(s, c, cfg, rng);
    EXPECT_TRUE((s.r.array() == 1).all());
  }
}

TEST(GibbsSweep, SameSeedReplaysExactly) {
  auto c = layout({1, 2, 3}, 3, 12);
  TopicConfig cfg;
  cfg.truncation = 4;
  Rng g(13);
  TopicConfig gen = cfg;
  gen.gamma_mass = 30.0;
  topic_sample_prior(c, gen, g);
  Rng a(14), b(14);
  auto s1 = topic_init(c, cfg, a);
  auto s2 = topic_init(c, cfg, b);
  for (int i = 0; i < 25; ++i) {
    gibbs_sweep(s1, c, cfg, a);
    gibbs_sweep(s2, c, cfg, b);
  }
  EXPECT_EQ(s1.allocations, s2.allocations);
  EXPECT_EQ(s1.beta, s2.beta);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(s1.crm.atoms[k].theta, s2.crm.atoms[k].theta);
    EXPECT_EQ(s1.crm.atoms[k].location.weights, s2.crm.atoms[k].location.weights);
  }
}

TEST(GibbsSweep, EmptyCorpusRedrawsRatesFromPrior) {
  Corpus c;
  c.vocabulary_size = 4;
  c.timestamps = {0.0};
  TopicConfig cfg;
  cfg.truncation = 2;
  Rng rng(15);
  auto s = topic_init(c, cfg, rng);
  double sum = 0.0;
  const int sweeps = 100000;
  for (int i = 0; i < sweeps; ++i) {
    gibbs_sweep(s, c, cfg, rng);
    sum += s.crm.atoms[0].mass;
  }
  // Ga(1/2, 1); the chain is independent draws here.
  EXPECT_NEAR(sum / sweeps, 0.5, 4 * std::sqrt(0.5 / sweeps));
}

// Getting-it-right at K = 2, P = 3, two timestamps with two documents each.
TEST(TopicGeweke, ForwardAndCoupledChainsAgree) {
  TopicConfig cfg;
  cfg.truncation = 2;
  cfg.alpha_theta = 0.5;
  cfg.e = 1.0;
  cfg.c0 = 4.0;
  cfg.d0 = 4.0;
  cfg.widths = {0.5, 2.0};
  auto c = layout({0.0, 1.0}, 2, 3);

  const auto stats = [](const TopicState& s, const Corpus& corpus) {
    double sum_r = s.r.cast<double>().sum();
    return std::vector<double>{s.crm.atoms[0].mass,
                               s.crm.atoms[0].mass * s.crm.atoms[0].mass,
                               s.crm.atoms[0].theta[0],
                               s.crm.atoms[0].theta[0] * s.crm.atoms[0].theta[0],
                               sum_r,
                               static_cast<double>(corpus.total()),
                               static_cast<double>(s.topic_total(0)),
                               s.beta(0, 0),
                               static_cast<double>(s.r(1, 3)),
                               s.crm.atoms[1].location.weights[0]};
  };
  GewekeRecorder rec({"pi0", "pi0^2", "theta00", "theta00^2", "sum r", "sum w", "sum w~0",
                      "beta00", "r13", "w10"});
  Rng rng(16);
  const int rounds = 10000;
  for (int i = 0; i < rounds; ++i) {
    const auto s = topic_sample_prior(c, cfg, rng);
    rec.record_forward(stats(s, c));
  }
  auto s = topic_sample_prior(c, cfg, rng);
  for (int i = 0; i < rounds; ++i) {
    gibbs_sweep(s, c, cfg, rng);
    s.check_invariants(c);
    topic_regenerate(s, c, rng);
    rec.record_gibbs(stats(s, c));
  }
  for (const auto& st : rec.compare()) {
    EXPECT_LT(std::abs(st.z), 4.0) << st.name << " forward " << st.forward.mean << " gibbs "
                                   << st.gibbs.mean;
  }
}

TEST(PredictiveRate, SamplesAverage) {
  TopicSample a;
  a.topics = Eigen::MatrixXd(2, 2);
  a.topics << 0.75, 0.25, 0.1, 0.9;
  a.masses = {2.0, 1.0};
  a.kernels = {constant_kernel(40.0), constant_kernel(0.0)};
  a.e = 1.5;
  const std::vector<TopicSample> one{a};
  const auto r1 = predictive_rate(std::span<const TopicSample>(one), 3.0);
  // 1.5 * (2 * 1 * theta_0 + 1 * 0.5 * theta_1)
  EXPECT_NEAR(r1[0], 1.5 * (2 * 0.75 + 0.5 * 0.1), 1e-12);
  EXPECT_NEAR(r1[1], 1.5 * (2 * 0.25 + 0.5 * 0.9), 1e-12);
  const std::vector<TopicSample> twice{a, a};
  EXPECT_TRUE(predictive_rate(std::span<const TopicSample>(twice), 3.0).isApprox(r1, 1e-12));

  TopicSample b = a;
  b.masses = {0.0, 4.0};
  const std::vector<TopicSample> pair{a, b};
  const auto r2 = predictive_rate(std::span<const TopicSample>(pair), 3.0);
  const double b0 = 1.5 * (4 * 0.5 * 0.1), b1 = 1.5 * (4 * 0.5 * 0.9);
  EXPECT_NEAR(r2[0], 0.5 * (r1[0] + b0), 1e-12);
  EXPECT_NEAR(r2[1], 0.5 * (r1[1] + b1), 1e-12);
  EXPECT_THROW(predictive_rate(std::span<const TopicSample>(), 0.0), UsageError);
}

TEST(TopicLogLikelihood, HandValue) {
  auto c = layout({0.0}, 1, 2);
  c.documents[0].words = {{0, 2}, {1, 1}};
  auto s = manual_state(c, {{0.75, 0.25}}, {2.0});
  s.allocations[0] = {2, 1};
  s.refresh_counts(c);
  // Rates 1.5 and 0.5, total 2.
  const double expected = 2 * std::log(1.5) - std::log(2.0) + std::log(0.5) - 2.0;
  EXPECT_NEAR(topic_log_likelihood(s, c), expected, 1e-12);
}

}  // namespace
}  // namespace tcrm
