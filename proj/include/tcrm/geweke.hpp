// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tcrm/error.hpp"

namespace tcrm {

/// Sample mean and its standard error. With `batches` > 1 the error comes
/// from non-overlapping batch means, which accounts for autocorrelation in
/// a Markov chain; with batches <= 1 the draws are treated as independent.
struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

inline MeanEstimate estimate_mean(std::span<const double> xs, std::size_t batches = 1) {
  if (xs.size() < 2) throw UsageError("need at least two draws to estimate a mean");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (batches <= 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
  }
  const std::size_t size = xs.size() / batches;
  if (size == 0) throw UsageError("more batches than draws");
  double ss = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double m = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) m += xs[i];
    m /= static_cast<double>(size);
    ss += (m - mean) * (m - mean);
  }
  const double nb = static_cast<double>(batches);
  return {mean, std::sqrt(ss / (nb - 1.0) / nb)};
}

/// Getting-it-right comparison of one test function: independent forward
/// draws from the joint versus the successive-conditional chain that
/// alternates a Gibbs sweep with regeneration of the data.
struct GewekeStatistic {
  std::string name;
  MeanEstimate forward;
  MeanEstimate gibbs;
  double z = 0.0;
};

inline GewekeStatistic geweke_compare(std::string name, std::span<const double> forward,
                                      std::span<const double> gibbs, std::size_t batches = 50) {
  GewekeStatistic s{std::move(name), estimate_mean(forward, 1), estimate_mean(gibbs, batches), 0.0};
  const double se = std::hypot(s.forward.standard_error, s.gibbs.standard_error);
  s.z = se > 0.0 ? (s.forward.mean - s.gibbs.mean) / se : (s.forward.mean == s.gibbs.mean ? 0.0 : INFINITY);
  return s;
}

/// Collects named test-function traces for both simulators.
class GewekeRecorder {
 public:
  explicit GewekeRecorder(std::vector<std::string> names)
      : names_(std::move(names)), forward_(names_.size()), gibbs_(names_.size()) {}

  void record_forward(std::span<const double> values) { push(forward_, values); }
  void record_gibbs(std::span<const double> values) { push(gibbs_, values); }

  std::vector<GewekeStatistic> compare(std::size_t batches = 50) const {
    std::vector<GewekeStatistic> out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      out.push_back(geweke_compare(names_[i], forward_[i], gibbs_[i], batches));
    }
    return out;
  }

 private:
  void push(std::vector<std::vector<double>>& dst, std::span<const double> values) {
    detail::require_same_size(names_.size(), values.size(), "Geweke statistics");
    for (std::size_t i = 0; i < values.size(); ++i) dst[i].push_back(values[i]);
  }

  std::vector<std::string> names_;
  std::vector<std::vector<double>> forward_;
  std::vector<std::vector<double>> gibbs_;
};

}  // namespace tcrm
