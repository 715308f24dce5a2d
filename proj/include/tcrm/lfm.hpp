// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tcrm/crm.hpp"
#include "tcrm/error.hpp"
#include "tcrm/random.hpp"
#include "tcrm/special_functions.hpp"
#include "tcrm/thinning.hpp"

namespace tcrm {

using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Real observations y^{n,t} on a grid of covariate values. Row n of `y`
/// sits at covariate grid[point_covariate[n]]. `observed` is all ones when
/// every entry is available; entries with observed == 0 are ignored.
struct LfmData {
  std::vector<double> grid;
  std::vector<std::size_t> point_covariate;
  Eigen::MatrixXd y;
  Eigen::MatrixXd observed;

  std::size_t size() const { return static_cast<std::size_t>(y.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(y.cols()); }

  void validate() const {
    detail::require_same_size(point_covariate.size(), size(), "points");
    if (observed.rows() != y.rows() || observed.cols() != y.cols()) {
      throw DimensionError("observed mask must match the data shape");
    }
    for (std::size_t t : point_covariate) {
      if (t >= grid.size()) throw DimensionError("point covariate index outside the grid");
    }
  }

  /// Indices of the points at each grid value.
  std::vector<std::vector<std::size_t>> points_by_covariate() const {
    std::vector<std::vector<std::size_t>> out(grid.size());
    for (std::size_t n = 0; n < point_covariate.size(); ++n) out[point_covariate[n]].push_back(n);
    return out;
  }
};

struct LfmConfig {
  std::size_t truncation = 20;
  bool dynamic = true;  // false: exchangeable model, r fixed at 1
  double c0 = 1.0;
  double d0 = 1.0;
  std::vector<double> widths{0.02, 0.05, 0.1, 0.3, 1.0};
  // Inverse-gamma priors (shape, scale) on the noise and feature variances.
  double noise_shape = 1.0;
  double noise_scale = 1.0;
  double feature_shape = 1.0;
  double feature_scale = 1.0;
  // Starting values for a fit.
  double initial_noise_variance = 1.0;
  double initial_feature_variance = 1.0;
  double initial_usage = 0.5;

  void validate() const {
    if (truncation < 2) throw ParameterError("truncation must be at least 2");
    if (!(noise_shape > 0.0) || !(noise_scale > 0.0) || !(feature_shape > 0.0) ||
        !(feature_scale > 0.0)) {
      throw ParameterError("variance priors must be positive");
    }
    if (!(initial_noise_variance > 0.0) || !(initial_feature_variance > 0.0)) {
      throw ParameterError("initial variances must be positive");
    }
    if (!(initial_usage >= 0.0 && initial_usage <= 1.0)) {
      throw ParameterError("initial usage must lie in [0, 1]");
    }
    RvmPrior{c0, d0, widths, {}}.validate();
  }
};

/// Gibbs state. Atom k carries the mass pi_k, the feature A_k and its kernel.
struct LfmState {
  TruncatedCRM<Eigen::VectorXd, ProbitRvmKernel<double>> crm;
  std::vector<RvmPrior> priors;
  BinaryMatrix r;  // K x T
  BinaryMatrix b;  // K x N
  BinaryMatrix z;  // K x N, z = b and r
  double noise_variance = 1.0;
  double feature_variance = 1.0;

  std::size_t features() const { return crm.size(); }

  Eigen::MatrixXd feature_matrix() const {
    const std::size_t d = crm.atoms.empty() ? 0 : static_cast<std::size_t>(crm.atoms[0].theta.size());
    Eigen::MatrixXd a(features(), d);
    for (std::size_t k = 0; k < features(); ++k) a.row(k) = crm.atoms[k].theta.transpose();
    return a;
  }

  std::size_t active_features() const {
    std::size_t n = 0;
    for (Eigen::Index k = 0; k < z.rows(); ++k) n += z.row(k).any() ? 1 : 0;
    return n;
  }

  /// z = b and r at every (k, n), given each point's covariate.
  void check_consistency(std::span<const std::size_t> point_covariate) const {
    for (Eigen::Index k = 0; k < z.rows(); ++k) {
      for (std::size_t n = 0; n < point_covariate.size(); ++n) {
        const auto i = static_cast<Eigen::Index>(n);
        const auto t = static_cast<Eigen::Index>(point_covariate[n]);
        if (z(k, i) != (b(k, i) & r(k, t))) throw InvariantViolation("z differs from b and r");
      }
    }
  }
};

/// Normalized joint masses of (b, r) for one data point, in the order
/// (1,1), (0,1), (1,0), (0,0). Only the (1,1) cell switches the feature on.
inline std::array<double, 4> feature_cell_probabilities(double p, double pi, double log_l1,
                                                        double log_l0) {
  const double ln = -std::numeric_limits<double>::infinity();
  const auto safe_log = [&](double x) { return x > 0.0 ? std::log(x) : ln; };
  std::array<double, 4> lw{safe_log(p) + safe_log(pi) + log_l1, safe_log(p) + safe_log(1 - pi) + log_l0,
                           safe_log(1 - p) + safe_log(pi) + log_l0,
                           safe_log(1 - p) + safe_log(1 - pi) + log_l0};
  const double norm = log_sum_exp(lw);
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = std::exp(lw[i] - norm);
  return out;
}

// ---------------------------------------------------------------------------
// Generative model

struct LfmTruth {
  Eigen::MatrixXd features;  // K x d
  std::vector<double> masses;
  std::vector<ProbitRvmKernel<double>> kernels;
  double noise_variance = 0.25;
};

struct LfmDraw {
  LfmData data;
  BinaryMatrix r;
  BinaryMatrix z;
};

/// z ~ Ber(r pi), y = sum_k z_k A_k + N(0, sigma^2 I) for `counts[t]` points at
/// each grid value.
inline LfmDraw lfm_generate(const LfmTruth& truth, std::vector<double> grid,
                            std::span<const std::size_t> counts, Rng& rng) {
  const auto K = static_cast<std::size_t>(truth.features.rows());
  detail::require_same_size(K, truth.masses.size(), "feature masses");
  detail::require_same_size(K, truth.kernels.size(), "feature kernels");
  detail::require_same_size(grid.size(), counts.size(), "points per covariate");
  if (!(truth.noise_variance >= 0.0)) throw ParameterError("noise variance must be nonnegative");
  LfmDraw out;
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  out.r.resize(K, grid.size());
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t t = 0; t < grid.size(); ++t) {
      out.r(k, t) = bernoulli(rng, thinning_probability(truth.kernels[k], grid[t])) ? 1 : 0;
    }
  }
  const auto d = truth.features.cols();
  out.data.y.resize(total, d);
  out.data.observed = Eigen::MatrixXd::Ones(total, d);
  out.z = BinaryMatrix::Zero(K, total);
  const double sd = std::sqrt(truth.noise_variance);
  std::size_t n = 0;
  for (std::size_t t = 0; t < grid.size(); ++t) {
    for (std::size_t i = 0; i < counts[t]; ++i, ++n) {
      out.data.point_covariate.push_back(t);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(d);
      for (std::size_t k = 0; k < K; ++k) {
        if (out.r(k, t) && bernoulli(rng, truth.masses[k])) {
          out.z(k, n) = 1;
          row += truth.features.row(k).transpose();
        }
      }
      for (Eigen::Index j = 0; j < d; ++j) row[j] += sd * standard_normal(rng);
      out.data.y.row(n) = row.transpose();
    }
  }
  out.data.grid = std::move(grid);
  return out;
}

// ---------------------------------------------------------------------------
// Gibbs sampler

namespace detail {

inline Eigen::MatrixXd lfm_residuals(const LfmState& s, const LfmData& data) {
  const Eigen::MatrixXd a = s.feature_matrix();
  Eigen::MatrixXd fit = s.z.cast<double>().transpose() * a;
  return data.observed.cwiseProduct(data.y - fit);
}

inline void lfm_sample_variances(LfmState& s, const LfmConfig& cfg, const Eigen::MatrixXd& e,
                                 const LfmData& data, Rng& rng) {
  const double n_obs = data.observed.sum();
  s.noise_variance = inverse_gamma(rng, cfg.noise_shape + 0.5 * n_obs,
                                   cfg.noise_scale + 0.5 * e.squaredNorm());
  double ss = 0.0, count = 0.0;
  for (const auto& atom : s.crm.atoms) {
    ss += atom.theta.squaredNorm();
    count += static_cast<double>(atom.theta.size());
  }
  s.feature_variance = inverse_gamma(rng, cfg.feature_shape + 0.5 * count, cfg.feature_scale + 0.5 * ss);
}

inline std::vector<RvmObservation<double>> lfm_rvm_observations(const LfmState& s, std::size_t k,
                                                                std::span<const double> grid) {
  std::vector<RvmObservation<double>> obs(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const std::uint32_t on = s.r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    obs[t] = {grid[t], on, 1u - on};
  }
  return obs;
}

}  // namespace detail

/// Draws (pi, kernels, precisions, widths, r, b, A, sigma^2, sigma_A^2) from the
/// prior for the given data layout.
inline LfmState lfm_sample_prior(const LfmData& data, const LfmConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t K = cfg.truncation, T = data.grid.size(), N = data.size();
  const auto d = static_cast<Eigen::Index>(data.dimension());
  LfmState s;
  s.noise_variance = inverse_gamma(rng, cfg.noise_shape, cfg.noise_scale);
  s.feature_variance = inverse_gamma(rng, cfg.feature_shape, cfg.feature_scale);
  const double sd_a = std::sqrt(s.feature_variance);
  s.priors.assign(K, RvmPrior{cfg.c0, cfg.d0, cfg.widths, {}});
  std::size_t k = 0;
  const auto theta = [&](Rng& r) {
    Eigen::VectorXd a(d);
    for (Eigen::Index j = 0; j < d; ++j) a[j] = sd_a * standard_normal(r);
    return a;
  };
  const auto location = [&](Rng& r) {
    auto& prior = s.priors[k++];
    if (!cfg.dynamic) return ProbitRvmKernel<double>{{0.0}, prior.width_dictionary[0], {}};
    return sample_rvm_kernel(data.grid, prior, r);
  };
  s.crm = draw_truncated_crm(LevySpec{BetaProcess{}, K}, theta, location, rng);
  s.r = BinaryMatrix::Ones(K, T);
  s.b.resize(K, N);
  s.z.resize(K, N);
  for (std::size_t j = 0; j < K; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (cfg.dynamic) {
      for (std::size_t t = 0; t < T; ++t) {
        s.r(jj, t) = bernoulli(rng, thinning_probability(s.crm.atoms[j].location, data.grid[t])) ? 1 : 0;
      }
    }
    for (std::size_t n = 0; n < N; ++n) {
      const auto nn = static_cast<Eigen::Index>(n);
      s.b(jj, nn) = bernoulli(rng, s.crm.atoms[j].mass) ? 1 : 0;
      s.z(jj, nn) = s.b(jj, nn) & s.r(jj, static_cast<Eigen::Index>(data.point_covariate[n]));
    }
  }
  return s;
}

/// Redraws y ~ N(ZA, sigma^2 I) at every entry of `data`.
inline void lfm_regenerate(const LfmState& s, LfmData& data, Rng& rng) {
  const Eigen::MatrixXd mean = s.z.cast<double>().transpose() * s.feature_matrix();
  const double sd = std::sqrt(s.noise_variance);
  for (Eigen::Index n = 0; n < data.y.rows(); ++n) {
    for (Eigen::Index j = 0; j < data.y.cols(); ++j) data.y(n, j) = mean(n, j) + sd * standard_normal(rng);
  }
}

namespace detail {

inline void lfm_update_features(LfmState& s, Eigen::MatrixXd& e, const LfmData& data, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(data.dimension());
  const double inv_noise = 1.0 / s.noise_variance;
  for (std::size_t k = 0; k < s.features(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    auto& a = s.crm.atoms[k].theta;
    Eigen::VectorXd precision = Eigen::VectorXd::Constant(d, 1.0 / s.feature_variance);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (Eigen::Index n = 0; n < e.rows(); ++n) {
      if (!s.z(kk, n)) continue;
      const auto w = data.observed.row(n).transpose();
      e.row(n) += w.cwiseProduct(a).transpose();
      precision += inv_noise * w;
      rhs += inv_noise * e.row(n).transpose();
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      a[j] = rhs[j] / precision[j] + standard_normal(rng) / std::sqrt(precision[j]);
    }
    for (Eigen::Index n = 0; n < e.rows(); ++n) {
      if (s.z(kk, n)) e.row(n) -= data.observed.row(n).cwiseProduct(a.transpose());
    }
  }
}

}  // namespace detail

/// Starting state for a fit: kernels and masses from the prior, every
/// indicator r on, usage b drawn at `initial_usage`, then A from its
/// conditional.
inline LfmState lfm_init(const LfmData& data, const LfmConfig& cfg, Rng& rng) {
  data.validate();
  LfmState s = lfm_sample_prior(data, cfg, rng);
  s.noise_variance = cfg.initial_noise_variance;
  s.feature_variance = cfg.initial_feature_variance;
  s.r.setOnes();
  for (std::size_t k = 0; k < s.features(); ++k) s.crm.atoms[k].mass = cfg.initial_usage;
  for (Eigen::Index k = 0; k < s.b.rows(); ++k) {
    for (Eigen::Index n = 0; n < s.b.cols(); ++n) s.b(k, n) = bernoulli(rng, cfg.initial_usage) ? 1 : 0;
  }
  s.z = s.b;
  for (auto& atom : s.crm.atoms) atom.theta.setZero();
  Eigen::MatrixXd e = detail::lfm_residuals(s, data);
  detail::lfm_update_features(s, e, data, rng);
  return s;
}

namespace detail {

inline void lfm_usage(LfmState& s, Eigen::MatrixXd& e, const LfmData& data, const LfmConfig& cfg,
                      Rng& rng) {
  const auto groups = data.points_by_covariate();
  const double inv2 = 0.5 / s.noise_variance;
  std::vector<double> delta;
  for (std::size_t k = 0; k < s.features(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd& a = s.crm.atoms[k].theta;
    const Eigen::VectorXd a2 = a.cwiseProduct(a);
    const double pi = s.crm.atoms[k].mass;
    const double log_pi = std::log(pi), log_not = std::log1p(-pi);
    for (std::size_t t = 0; t < data.grid.size(); ++t) {
      const auto& pts = groups[t];
      delta.resize(pts.size());
      // log of prod_n [pi e^delta_n + 1 - pi], the r = 1 mass relative to z = 0
      double log_on = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto n = static_cast<Eigen::Index>(pts[i]);
        if (s.z(kk, n)) e.row(n) += data.observed.row(n).cwiseProduct(a.transpose());
        delta[i] = inv2 * (2.0 * e.row(n).dot(a) - data.observed.row(n).dot(a2));
        log_on += log_sum_exp(log_pi + delta[i], log_not);
      }
      std::uint8_t on = 1;
      if (cfg.dynamic) {
        const double p = thinning_probability(s.crm.atoms[k].location, data.grid[t]);
        const std::array<double, 2> lw{p < 1.0 ? std::log1p(-p) : -INFINITY,
                                       p > 0.0 ? std::log(p) + log_on : -INFINITY};
        on = static_cast<std::uint8_t>(categorical_log(rng, lw));
      }
      s.r(kk, static_cast<Eigen::Index>(t)) = on;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto n = static_cast<Eigen::Index>(pts[i]);
        const double q = on ? inv_logit(log_pi + delta[i] - log_not) : pi;
        s.b(kk, n) = bernoulli(rng, q) ? 1 : 0;
        s.z(kk, n) = s.b(kk, n) & on;
        if (s.z(kk, n)) e.row(n) -= data.observed.row(n).cwiseProduct(a.transpose());
      }
    }
  }
}

}  // namespace detail

/// (r_k^t, b_k^{n,t}) for all points at t drawn as one block: r from its
/// marginal with the b's summed out, then each b given r.
inline void lfm_sample_usage(LfmState& s, const LfmData& data, const LfmConfig& cfg, Rng& rng) {
  Eigen::MatrixXd e = detail::lfm_residuals(s, data);
  detail::lfm_usage(s, e, data, cfg, rng);
}

/// A_k | rest, coordinate-wise Gaussian with precision sum z / sigma^2 + 1 / sigma_A^2.
inline void lfm_sample_features(LfmState& s, const LfmData& data, Rng& rng) {
  Eigen::MatrixXd e = detail::lfm_residuals(s, data);
  detail::lfm_update_features(s, e, data, rng);
}

/// pi_k ~ Be(1/K + sum_n b, 1 - 1/K + N - sum_n b).
inline void lfm_sample_masses(LfmState& s, Rng& rng) {
  const double K = static_cast<double>(s.features());
  const double N = static_cast<double>(s.b.cols());
  for (std::size_t k = 0; k < s.features(); ++k) {
    const double used = s.b.row(static_cast<Eigen::Index>(k)).cast<double>().sum();
    s.crm.atoms[k].mass = beta(rng, 1.0 / K + used, 1.0 - 1.0 / K + N - used);
  }
}

/// RVM block per kernel with the indicators r_k^t as observations.
inline void lfm_sample_kernels(LfmState& s, const LfmData& data, Rng& rng) {
  for (std::size_t k = 0; k < s.features(); ++k) {
    const auto obs = detail::lfm_rvm_observations(s, k, data.grid);
    rvm_gibbs_block(std::span<const RvmObservation<double>>(obs), s.crm.atoms[k].location,
                    s.priors[k], rng);
  }
}

inline void lfm_sample_variances(LfmState& s, const LfmData& data, const LfmConfig& cfg, Rng& rng) {
  detail::lfm_sample_variances(s, cfg, detail::lfm_residuals(s, data), data, rng);
}

/// One systematic scan: (b, r) jointly per feature and covariate, A, pi, the
/// RVM block per kernel, then the two variances.
inline void lfm_gibbs_sweep(LfmState& s, const LfmData& data, const LfmConfig& cfg, Rng& rng) {
  Eigen::MatrixXd e = detail::lfm_residuals(s, data);
  detail::lfm_usage(s, e, data, cfg, rng);
  detail::lfm_update_features(s, e, data, rng);
  lfm_sample_masses(s, rng);
  if (cfg.dynamic) lfm_sample_kernels(s, data, rng);
  detail::lfm_sample_variances(s, cfg, e, data, rng);
}

/// Gaussian log-likelihood of the entries selected by `weights` (1 = include).
inline double lfm_log_likelihood(const LfmState& s, const LfmData& data, const Eigen::MatrixXd& weights) {
  const Eigen::MatrixXd mean = s.z.cast<double>().transpose() * s.feature_matrix();
  const double n = weights.sum();
  const double ss = weights.cwiseProduct((data.y - mean).cwiseAbs2()).sum();
  return -0.5 * n * std::log(2.0 * M_PI * s.noise_variance) - 0.5 * ss / s.noise_variance;
}

inline double lfm_log_likelihood(const LfmState& s, const LfmData& data) {
  return lfm_log_likelihood(s, data, data.observed);
}

/// Posterior-mean thinning curve p_k(t) of every feature on the grid.
inline Eigen::MatrixXd lfm_curves(const LfmState& s, std::span<const double> grid) {
  Eigen::MatrixXd out(s.features(), grid.size());
  for (std::size_t k = 0; k < s.features(); ++k) {
    for (std::size_t t = 0; t < grid.size(); ++t) {
      out(k, t) = thinning_probability(s.crm.atoms[k].location, grid[t]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

/// A point with some coordinates observed. When `grid_index` is set the
/// point shares the sample's indicators r at that covariate; otherwise r is
/// marginalized through p_k(covariate).
struct LfmTestPoint {
  double covariate = 0.0;
  std::optional<std::size_t> grid_index;
  Eigen::VectorXd y;
  std::vector<std::uint8_t> observed;
};

/// Mean of zA at the unobserved coordinates, averaged over samples and over
/// `inner_sweeps` Gibbs scans of the test point's z given its observed entries.
inline std::vector<double> lfm_predict_missing(std::span<const LfmState> samples,
                                               const LfmTestPoint& point, Rng& rng,
                                               std::size_t inner_sweeps = 20) {
  if (samples.empty()) throw UsageError("prediction needs at least one posterior sample");
  if (inner_sweeps == 0) throw UsageError("prediction needs at least one inner sweep");
  const auto d = point.y.size();
  detail::require_same_size(static_cast<std::size_t>(d), point.observed.size(), "observed mask");
  Eigen::VectorXd w(d);
  for (Eigen::Index j = 0; j < d; ++j) w[j] = point.observed[j] ? 1.0 : 0.0;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) {
    const std::size_t K = s.features();
    std::vector<double> p(K);
    for (std::size_t k = 0; k < K; ++k) {
      if (point.grid_index) {
        p[k] = s.r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(*point.grid_index));
      } else {
        p[k] = thinning_probability(s.crm.atoms[k].location, point.covariate);
      }
    }
    std::vector<std::uint8_t> z(K);
    Eigen::VectorXd fit = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < K; ++k) {
      z[k] = bernoulli(rng, p[k] * s.crm.atoms[k].mass) ? 1 : 0;
      if (z[k]) fit += s.crm.atoms[k].theta;
    }
    const double inv2 = 0.5 / s.noise_variance;
    for (std::size_t sweep = 0; sweep < inner_sweeps; ++sweep) {
      for (std::size_t k = 0; k < K; ++k) {
        const Eigen::VectorXd& a = s.crm.atoms[k].theta;
        if (z[k]) fit -= a;
        const Eigen::VectorXd resid = w.cwiseProduct(point.y - fit);
        const double log_l1 = inv2 * (2.0 * resid.dot(a) - w.dot(a.cwiseProduct(a)));
        const auto cells = feature_cell_probabilities(p[k], s.crm.atoms[k].mass, log_l1, 0.0);
        z[k] = bernoulli(rng, cells[0]) ? 1 : 0;
        if (z[k]) fit += a;
      }
      total += fit;
    }
  }
  total /= static_cast<double>(samples.size() * inner_sweeps);
  std::vector<double> out;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!point.observed[j]) out.push_back(total[j]);
  }
  return out;
}

}  // namespace tcrm
