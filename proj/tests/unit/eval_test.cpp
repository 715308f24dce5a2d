// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "tcrm/eval.hpp"

namespace tcrm {
namespace {

Corpus one_doc(std::vector<WordCount> words, std::size_t P) {
  Corpus c;
  c.vocabulary_size = P;
  c.timestamps = {0.0};
  c.documents.push_back({"d", 0, std::move(words)});
  return c;
}

TopicSample single_topic(std::vector<double> theta, std::size_t docs = 1) {
  TopicSample s;
  s.topics = Eigen::Map<Eigen::RowVectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  s.masses = {1.0};
  s.kernels = {ProbitRvmKernel<double>{{8.0}, 1.0, {}}};
  s.r = BinaryIndicators::Ones(1, static_cast<Eigen::Index>(docs));
  s.beta = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(docs));
  return s;
}

TEST(Perplexity, HandEvaluatedTwoWordExample) {
  const auto held = one_doc({{0, 3}, {1, 1}}, 2);
  const std::vector<TopicSample> samples{single_topic({0.75, 0.25})};
  const double expected = std::exp(-(3.0 * std::log(0.75) + std::log(0.25)) / 4.0);
  EXPECT_NEAR(perplexity(samples, held), expected, 1e-12);
  EXPECT_NEAR(perplexity(samples, held), 1.7548, 1e-4);
}

TEST(Perplexity, UniformPredictiveGivesVocabularySize) {
  const auto held = one_doc({{0, 5}, {3, 2}, {9, 7}}, 10);
  const std::vector<TopicSample> samples{single_topic(std::vector<double>(10, 0.1))};
  EXPECT_NEAR(perplexity(samples, held), 10.0, 1e-10);
}

TEST(Perplexity, SingleTokenIsInverseProbability) {
  const auto held = one_doc({{1, 1}}, 3);
  const std::vector<TopicSample> samples{single_topic({0.5, 0.125, 0.375})};
  EXPECT_NEAR(perplexity(samples, held), 8.0, 1e-10);
}

TEST(Perplexity, MixesTopicsAndSamplesThroughRates) {
  // two topics with rates 1 and 3 mix to (1*(1,0) + 3*(0.5,0.5)) / 4
  Corpus held = one_doc({{0, 2}, {1, 1}}, 2);
  TopicSample s;
  s.topics.resize(2, 2);
  s.topics << 1.0, 0.0, 0.5, 0.5;
  s.masses = {0.5, 1.5};
  s.kernels.assign(2, ProbitRvmKernel<double>{{0.0}, 1.0, {}});
  s.r = BinaryIndicators::Ones(2, 1);
  s.beta = Eigen::MatrixXd::Constant(2, 1, 2.0);
  const double q0 = 2.5 / 4.0, q1 = 1.5 / 4.0;
  const std::vector<TopicSample> one{s};
  EXPECT_NEAR(perplexity(one, held), std::exp(-(2.0 * std::log(q0) + std::log(q1)) / 3.0), 1e-12);

  // switching topic 1 off leaves only topic 0
  s.r(1, 0) = 0;
  held = one_doc({{0, 4}}, 2);
  const std::vector<TopicSample> off{s};
  EXPECT_NEAR(perplexity(off, held), 1.0, 1e-12);
}

TEST(Perplexity, InvariantUnderDuplicatingSamples) {
  Rng rng(3);
  auto synth = generate_synthetic_corpus(3, 12, 2, 3, rng);
  std::vector<TopicSample> samples;
  for (int b = 0; b < 3; ++b) {
    TopicSample s;
    s.topics = synth.topics;
    for (Eigen::Index k = 0; k < s.topics.rows(); ++k) {
      for (Eigen::Index p = 0; p < s.topics.cols(); ++p) s.topics(k, p) += uniform01(rng);
      s.topics.row(k) /= s.topics.row(k).sum();
    }
    s.masses = synth.masses;
    s.kernels = synth.kernels;
    s.r = BinaryIndicators::Ones(3, static_cast<Eigen::Index>(synth.corpus.size()));
    s.beta = synth.beta;
    samples.push_back(s);
  }
  auto doubled = samples;
  doubled.insert(doubled.end(), samples.begin(), samples.end());
  EXPECT_NEAR(perplexity(samples, synth.corpus), perplexity(doubled, synth.corpus), 1e-9);
}

TEST(Perplexity, Errors) {
  const auto empty = one_doc({}, 2);
  EXPECT_THROW(PerplexityAccumulator{empty}, UsageError);
  const auto held = one_doc({{0, 1}}, 2);
  PerplexityAccumulator acc(held);
  EXPECT_THROW(acc.value(), UsageError);
}

TEST(Rmse, Examples) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  EXPECT_EQ(rmse(a, a), 0.0);
  const std::vector<double> p{3.0, 4.0}, z{0.0, 0.0};
  EXPECT_NEAR(rmse(p, z), std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(rmse(p, z), 3.5355, 1e-4);
  const std::vector<double> shifted{1.0 - 0.7, 2.0 - 0.7, 3.0 - 0.7};
  EXPECT_NEAR(rmse(shifted, a), 0.7, 1e-12);
  EXPECT_THROW(rmse(a, p), DimensionError);
  EXPECT_THROW(rmse(std::span<const double>{}, std::span<const double>{}), UsageError);
}

TEST(Splits, WordLevelConservesCounts) {
  Rng rng(9);
  auto synth = generate_synthetic_corpus(4, 30, 3, 10, rng);
  const auto split = split_words(synth.corpus, 0.2, rng);
  ASSERT_EQ(split.train.size(), synth.corpus.size());
  ASSERT_EQ(split.heldout.size(), synth.corpus.size());
  std::uint64_t held = 0;
  for (std::size_t n = 0; n < synth.corpus.size(); ++n) {
    std::vector<std::uint64_t> sum(30, 0);
    for (const auto& w : split.train.documents[n].words) sum[w.word] += w.count;
    for (const auto& w : split.heldout.documents[n].words) sum[w.word] += w.count;
    std::vector<std::uint64_t> orig(30, 0);
    for (const auto& w : synth.corpus.documents[n].words) orig[w.word] += w.count;
    EXPECT_EQ(sum, orig);
    held += split.heldout.documents[n].total();
  }
  EXPECT_NO_THROW(split.train.validate());
  EXPECT_NO_THROW(split.heldout.validate());
  const double frac = static_cast<double>(held) / static_cast<double>(synth.corpus.total());
  const double se = std::sqrt(0.16 / static_cast<double>(synth.corpus.total()));
  EXPECT_NEAR(frac, 0.2, 4.0 * se);
}

TEST(Splits, DocumentLevelIsDisjointPerGroup) {
  Rng rng(10);
  auto synth = generate_synthetic_corpus(2, 10, 6, 10, rng);
  const std::vector<std::size_t> groups{0, 0, 1, 1, 2, 2};
  const auto split = split_documents(synth.corpus, groups, 0.2, rng);
  EXPECT_EQ(split.train.size() + split.heldout.size(), synth.corpus.size());
  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.heldout.begin(), split.heldout.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(synth.corpus.size());
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
  std::vector<int> per_group(3, 0);
  for (std::size_t n : split.heldout) ++per_group[groups[synth.corpus.documents[n].timestamp]];
  EXPECT_EQ(per_group, (std::vector<int>{4, 4, 4}));
  const auto sub = subset(synth.corpus, split.heldout);
  EXPECT_EQ(sub.size(), split.heldout.size());
  EXPECT_NO_THROW(sub.validate());
}

TEST(Decade, SingleCandidateAndOrthogonalRates) {
  // topic k has word k and is on only near timestamp k
  TopicSample s;
  s.topics = Eigen::MatrixXd::Identity(3, 3);
  s.masses = {5.0, 5.0, 5.0};
  for (int k = 0; k < 3; ++k) s.kernels.push_back(ProbitRvmKernel<double>{{-6.0, 12.0}, 10.0, {double(k)}});
  s.r = BinaryIndicators::Ones(3, 1);
  s.beta = Eigen::MatrixXd::Ones(3, 1);
  const std::vector<TopicSample> samples{s};
  const std::vector<double> ts{0.0, 1.0, 2.0};
  const Document doc{"x", 0, {{1, 4}}};
  EXPECT_EQ(decade_predict(samples, ts, {{0, 1, 2}}, doc), 0u);
  EXPECT_EQ(decade_predict(samples, ts, {{0}, {1}, {2}}, doc), 1u);
  EXPECT_EQ(decade_predict(samples, ts, {{2}, {0}, {1}}, doc), 2u);
  EXPECT_EQ(decade_predict(samples, ts, {{0, 2}, {1, 2}}, doc), 1u);
  EXPECT_THROW(DecadePredictor(samples, ts, {}), UsageError);
  EXPECT_THROW(DecadePredictor(samples, ts, {{}}), UsageError);
  EXPECT_THROW(DecadePredictor(samples, ts, {{3}}), DimensionError);
}

TEST(Decade, TiesGoToEarliestAndScalingKeepsArgmax) {
  const std::vector<TopicSample> samples{single_topic({0.5, 0.5})};
  const std::vector<double> ts{0.0, 1.0, 2.0};
  const Document doc{"x", 0, {{0, 2}, {1, 1}}};
  EXPECT_EQ(decade_predict(samples, ts, {{1}, {0}, {2}}, doc), 0u);

  // a word whose rate is the same in every decade multiplies every likelihood
  // by a common factor
  TopicSample s;
  s.topics = Eigen::MatrixXd::Identity(3, 3);
  s.masses = {2.0, 2.0, 2.0};
  s.kernels = {ProbitRvmKernel<double>{{-3.0, 6.0}, 5.0, {0.0}}, ProbitRvmKernel<double>{{-3.0, 6.0}, 5.0, {1.0}},
               ProbitRvmKernel<double>{{9.0}, 1.0, {}}};
  s.r = BinaryIndicators::Ones(3, 1);
  s.beta = Eigen::MatrixXd::Ones(3, 1);
  const std::vector<TopicSample> three{s};
  const std::vector<double> t2{0.0, 1.0};
  DecadePredictor pred(three, t2, {{0}, {1}});
  const Document a{"a", 0, {{0, 3}}};
  const Document a_more{"a", 0, {{0, 3}, {2, 5}}};
  const auto sa = pred.scores(a);
  const auto sb = pred.scores(a_more);
  EXPECT_NEAR(sa[0] - sa[1], sb[0] - sb[1], 1e-9);
  EXPECT_NE(sa[0], sb[0]);
  EXPECT_EQ(pred.predict(a), 0u);
  EXPECT_EQ(pred.predict(a_more), 0u);
}

TEST(Matching, AgreesWithExhaustiveSearch) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd score(5, 5);
    for (Eigen::Index i = 0; i < 25; ++i) score.data()[i] = 2.0 * uniform01(rng) - 1.0;
    std::vector<int> perm{0, 1, 2, 3, 4};
    double best = -1e9;
    do {
      double v = 0.0;
      for (int i = 0; i < 5; ++i) v += score(i, perm[i]);
      best = std::max(best, v);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto m = match_assignment(score);
    double got = 0.0;
    std::vector<long> seen = m;
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(std::unique(seen.begin(), seen.end()), seen.end());
    for (int i = 0; i < 5; ++i) got += score(i, m[i]);
    EXPECT_NEAR(got, best, 1e-5);
  }
}

TEST(Matching, RectangularLeavesRowsOrColumnsOver) {
  Eigen::MatrixXd wide(2, 4);
  wide << 0.1, 0.9, 0.2, 0.3,
          0.8, 0.95, 0.1, 0.0;
  EXPECT_EQ(match_assignment(wide), (std::vector<long>{1, 0}));
  const auto tall = match_assignment(wide.transpose());
  EXPECT_EQ(std::count(tall.begin(), tall.end(), -1L), 2);
  EXPECT_EQ(tall[0], 1);
  EXPECT_EQ(tall[1], 0);
}

TEST(Matching, RecoveryScorePermutedTruthIsPerfect) {
  Rng rng(5);
  auto bag = generate_bag_of_items(rng);
  const Eigen::MatrixXd& A = bag.truth.features;
  Eigen::MatrixXd learned(10, A.cols());
  Eigen::MatrixXd learned_curves = Eigen::MatrixXd::Zero(10, bag.curves.cols());
  const std::vector<int> perm{3, 7, 0, 9, 1, 4, 6, 2};
  for (Eigen::Index j = 0; j < 10; ++j) {
    for (Eigen::Index p = 0; p < A.cols(); ++p) learned(j, p) = normal(rng, 0.0, 1.0);
  }
  for (int k = 0; k < 8; ++k) {
    learned.row(perm[k]) = 2.0 * A.row(k);
    learned_curves.row(perm[k]) = bag.curves.row(k);
  }
  const auto rec = score_feature_recovery(A, learned, bag.curves, learned_curves);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(rec.match[k], perm[k]);
  EXPECT_NEAR(rec.mean_correlation, 1.0, 1e-12);
  EXPECT_NEAR(rec.curve_rmse, 0.0, 1e-12);
}

TEST(Generators, BagOfItemsShapes) {
  Rng rng(6);
  const auto bag = generate_bag_of_items(rng);
  EXPECT_EQ(bag.truth.features.rows(), 8);
  EXPECT_EQ(bag.truth.features.cols(), 64);
  EXPECT_EQ(bag.draw.data.y.rows(), 2000);
  EXPECT_EQ(bag.draw.data.y.cols(), 64);
  EXPECT_EQ(bag.curves.rows(), 8);
  EXPECT_EQ(bag.curves.cols(), 20);
  EXPECT_GE(bag.curves.minCoeff(), 0.0);
  EXPECT_LE(bag.curves.maxCoeff(), 1.0);
  for (Eigen::Index k = 0; k < 8; ++k) EXPECT_EQ(bag.truth.features.row(k).sum(), 15.0);
  EXPECT_NO_THROW(bag.draw.data.validate());
}

TEST(Generators, EveryTrueFeatureIsCarried) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    BagOfItemsOptions o;
    o.points_per_covariate = 2;
    const auto bag = generate_bag_of_items(rng, o);
    for (Eigen::Index k = 0; k < 8; ++k) {
      EXPECT_GT(bag.draw.z.row(k).cast<int>().sum(), 0) << "seed " << seed << " feature " << k;
      // the returned curves belong to the kernels that generated the data
      for (Eigen::Index t = 0; t < 20; ++t) {
        EXPECT_DOUBLE_EQ(bag.curves(k, t), thinning_probability(bag.truth.kernels[k], bag.draw.data.grid[t]));
      }
    }
  }
  BagOfItemsOptions none;
  none.points_per_covariate = 0;
  none.max_redraws = 3;
  Rng rng(1);
  EXPECT_THROW(generate_bag_of_items(rng, none), NumericalError);
}

TEST(Generators, NoiselessBagOfItemsLiesInActiveSpan) {
  Rng rng(7);
  BagOfItemsOptions o;
  o.noise_variance = 0.0;
  const auto bag = generate_bag_of_items(rng, o);
  const Eigen::MatrixXd& A = bag.truth.features;
  for (Eigen::Index n = 0; n < bag.draw.data.y.rows(); ++n) {
    Eigen::MatrixXd active(A.cols(), 0);
    for (Eigen::Index k = 0; k < A.rows(); ++k) {
      if (!bag.draw.z(k, n)) continue;
      active.conservativeResize(Eigen::NoChange, active.cols() + 1);
      active.col(active.cols() - 1) = A.row(k).transpose();
    }
    const Eigen::VectorXd y = bag.draw.data.y.row(n).transpose();
    if (active.cols() == 0) {
      EXPECT_EQ(y.norm(), 0.0);
      continue;
    }
    const Eigen::VectorXd coef = active.colPivHouseholderQr().solve(y);
    EXPECT_LT((active * coef - y).norm(), 1e-8);
  }
}

TEST(Generators, SyntheticCorpusAllocationsReproduceCounts) {
  Rng rng(8);
  const auto synth = generate_synthetic_corpus(5, 40, 4, 6, rng);
  ASSERT_NO_THROW(synth.corpus.validate());
  EXPECT_EQ(synth.corpus.size(), 24u);
  for (std::size_t n = 0; n < synth.corpus.size(); ++n) {
    const auto& d = synth.corpus.documents[n];
    EXPECT_GT(d.total(), 0u);
    ASSERT_EQ(synth.allocations[n].size(), d.words.size() * 5);
    for (std::size_t i = 0; i < d.words.size(); ++i) {
      std::uint32_t sum = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        sum += synth.allocations[n][i * 5 + k];
        if (synth.allocations[n][i * 5 + k] > 0) {
          EXPECT_EQ(synth.r(k, n), 1);
        }
      }
      EXPECT_EQ(sum, d.words[i].count);
    }
  }
  Rng a(11), b(11);
  const auto s1 = generate_synthetic_corpus(3, 10, 2, 2, a);
  const auto s2 = generate_synthetic_corpus(3, 10, 2, 2, b);
  for (std::size_t n = 0; n < s1.corpus.size(); ++n) EXPECT_EQ(s1.corpus.documents[n].words, s2.corpus.documents[n].words);
}

TEST(Generators, WordFrequenciesConvergeToMixture) {
  Rng rng(12);
  const auto synth = generate_synthetic_corpus(3, 6, 1, 10000, rng);
  // expected counts: sum over docs of sum_k r pi beta theta, conditional on the drawn r and beta
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(6), observed = Eigen::VectorXd::Zero(6);
  for (std::size_t n = 0; n < synth.corpus.size(); ++n) {
    for (const auto& w : synth.corpus.documents[n].words) observed[w.word] += w.count;
    for (Eigen::Index k = 0; k < 3; ++k) {
      if (!synth.r(k, n)) continue;
      expected += synth.masses[k] * synth.beta(k, n) * synth.topics.row(k).transpose();
    }
  }
  for (Eigen::Index p = 0; p < 6; ++p) {
    if (expected[p] < 1.0) continue;
    EXPECT_NEAR(observed[p] / expected[p], 1.0, 5.0 / std::sqrt(expected[p]) + 0.01);
  }
}

TEST(Generators, SingleTopicSharesOneRateVector) {
  Rng rng(13);
  const auto synth = generate_synthetic_corpus(1, 8, 1, 5, rng);
  for (std::size_t n = 0; n < synth.corpus.size(); ++n) {
    for (const auto& w : synth.corpus.documents[n].words) EXPECT_GT(synth.topics(0, w.word), 0.0);
    EXPECT_EQ(synth.r(0, n), 1);
  }
}

}  // namespace
}  // namespace tcrm
