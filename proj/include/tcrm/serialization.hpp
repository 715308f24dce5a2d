// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tcrm/crm.hpp"
#include "tcrm/error.hpp"
#include "tcrm/lfm.hpp"
#include "tcrm/tgap_pfa.hpp"
#include "tcrm/thinning.hpp"

namespace tcrm {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Dense matrices as arrays of rows

template <class Derived>
json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Out = std::conditional_t<std::is_same_v<Scalar, std::uint8_t>, int, Scalar>;
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(static_cast<Out>(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class Matrix>
Matrix matrix_from_json(const json& j) {
  using Scalar = typename Matrix::Scalar;
  using In = std::conditional_t<std::is_same_v<Scalar, std::uint8_t>, int, Scalar>;
  if (!j.is_array()) throw FormatError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw FormatError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = static_cast<Scalar>(row[static_cast<std::size_t>(c)].get<In>());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Kernels and priors

inline void to_json(json& j, const ProbitRvmKernel<double>& k) {
  j = json{{"omega", k.weights}, {"phi", k.width}, {"centers", k.centers}};
}

inline void from_json(const json& j, ProbitRvmKernel<double>& k) {
  j.at("omega").get_to(k.weights);
  j.at("phi").get_to(k.width);
  j.at("centers").get_to(k.centers);
  if (k.weights.size() != k.centers.size() + 1) throw FormatError("kernel needs one weight per center plus an intercept");
}

inline void to_json(json& j, const RvmPrior& p) {
  j = json{{"c0", p.c0}, {"d0", p.d0}, {"widths", p.width_dictionary}, {"precisions", p.precisions}};
}

inline void from_json(const json& j, RvmPrior& p) {
  j.at("c0").get_to(p.c0);
  j.at("d0").get_to(p.d0);
  j.at("widths").get_to(p.width_dictionary);
  j.at("precisions").get_to(p.precisions);
}

// ---------------------------------------------------------------------------
// Truncated CRM: {"family", "K", "atoms": [{"pi", "theta", "x"}]}

inline void to_json(json& j, const LevySpec& s) {
  if (const auto* b = std::get_if<BetaProcess>(&s.family)) {
    j = json{{"family", "beta"}, {"K", s.truncation}, {"concentration", b->concentration}};
  } else {
    const auto& g = std::get<GammaProcess>(s.family);
    j = json{{"family", "gamma"}, {"K", s.truncation}, {"mass", g.mass}, {"rate", g.rate}};
  }
}

inline void from_json(const json& j, LevySpec& s) {
  const auto family = j.at("family").get<std::string>();
  j.at("K").get_to(s.truncation);
  if (family == "beta") {
    s.family = BetaProcess{j.value("concentration", 1.0)};
  } else if (family == "gamma") {
    s.family = GammaProcess{j.value("mass", 1.0), j.value("rate", 1.0)};
  } else {
    throw FormatError("unknown process family '" + family + "'");
  }
}

namespace detail {

inline json theta_to_json(const std::vector<double>& v) { return v; }
inline json theta_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
inline void theta_from_json(const json& j, std::vector<double>& v) { j.get_to(v); }
inline void theta_from_json(const json& j, Eigen::VectorXd& v) {
  const auto x = j.get<std::vector<double>>();
  v = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

}  // namespace detail

template <class Theta, class Location>
void to_json(json& j, const TruncatedCRM<Theta, Location>& crm) {
  j = crm.spec;
  json atoms = json::array();
  for (const auto& a : crm.atoms) {
    atoms.push_back(json{{"pi", a.mass}, {"theta", detail::theta_to_json(a.theta)}, {"x", a.location}});
  }
  j["atoms"] = std::move(atoms);
}

template <class Theta, class Location>
void from_json(const json& j, TruncatedCRM<Theta, Location>& crm) {
  j.get_to(crm.spec);
  crm.atoms.clear();
  for (const auto& a : j.at("atoms")) {
    Atom<Theta, Location> atom;
    a.at("pi").get_to(atom.mass);
    detail::theta_from_json(a.at("theta"), atom.theta);
    a.at("x").get_to(atom.location);
    crm.atoms.push_back(std::move(atom));
  }
}

// ---------------------------------------------------------------------------
// Configurations

inline void to_json(json& j, const LfmConfig& c) {
  j = json{{"truncation", c.truncation},
           {"dynamic", c.dynamic},
           {"c0", c.c0},
           {"d0", c.d0},
           {"widths", c.widths},
           {"noise_shape", c.noise_shape},
           {"noise_scale", c.noise_scale},
           {"feature_shape", c.feature_shape},
           {"feature_scale", c.feature_scale},
           {"initial_noise_variance", c.initial_noise_variance},
           {"initial_feature_variance", c.initial_feature_variance},
           {"initial_usage", c.initial_usage}};
}

inline void from_json(const json& j, LfmConfig& c) {
  j.at("truncation").get_to(c.truncation);
  j.at("dynamic").get_to(c.dynamic);
  j.at("c0").get_to(c.c0);
  j.at("d0").get_to(c.d0);
  j.at("widths").get_to(c.widths);
  j.at("noise_shape").get_to(c.noise_shape);
  j.at("noise_scale").get_to(c.noise_scale);
  j.at("feature_shape").get_to(c.feature_shape);
  j.at("feature_scale").get_to(c.feature_scale);
  j.at("initial_noise_variance").get_to(c.initial_noise_variance);
  j.at("initial_feature_variance").get_to(c.initial_feature_variance);
  j.at("initial_usage").get_to(c.initial_usage);
}

inline void to_json(json& j, const TopicConfig& c) {
  j = json{{"truncation", c.truncation}, {"dynamic", c.dynamic}, {"alpha_theta", c.alpha_theta},
           {"e", c.e},                   {"gamma_mass", c.gamma_mass}, {"gamma_rate", c.gamma_rate},
           {"c0", c.c0},                 {"d0", c.d0},           {"widths", c.widths}};
}

inline void from_json(const json& j, TopicConfig& c) {
  j.at("truncation").get_to(c.truncation);
  j.at("dynamic").get_to(c.dynamic);
  j.at("alpha_theta").get_to(c.alpha_theta);
  j.at("e").get_to(c.e);
  j.at("gamma_mass").get_to(c.gamma_mass);
  j.at("gamma_rate").get_to(c.gamma_rate);
  j.at("c0").get_to(c.c0);
  j.at("d0").get_to(c.d0);
  j.at("widths").get_to(c.widths);
}

// ---------------------------------------------------------------------------
// Model states

inline void to_json(json& j, const LfmState& s) {
  j = json{{"crm", s.crm},
           {"priors", s.priors},
           {"r", matrix_to_json(s.r)},
           {"b", matrix_to_json(s.b)},
           {"z", matrix_to_json(s.z)},
           {"noise_variance", s.noise_variance},
           {"feature_variance", s.feature_variance}};
}

inline void from_json(const json& j, LfmState& s) {
  j.at("crm").get_to(s.crm);
  j.at("priors").get_to(s.priors);
  s.r = matrix_from_json<BinaryMatrix>(j.at("r"));
  s.b = matrix_from_json<BinaryMatrix>(j.at("b"));
  s.z = matrix_from_json<BinaryMatrix>(j.at("z"));
  j.at("noise_variance").get_to(s.noise_variance);
  j.at("feature_variance").get_to(s.feature_variance);
}

/// Posterior sample of the topic model. Allocations are left out: they are
/// recoverable in distribution and dominate the size.
inline void to_json(json& j, const TopicSample& s) {
  j = json{{"topics", matrix_to_json(s.topics)},
           {"masses", s.masses},
           {"kernels", s.kernels},
           {"r", matrix_to_json(s.r)},
           {"beta", matrix_to_json(s.beta)},
           {"e", s.e},
           {"dynamic", s.dynamic}};
}

inline void from_json(const json& j, TopicSample& s) {
  s.topics = matrix_from_json<Eigen::MatrixXd>(j.at("topics"));
  j.at("masses").get_to(s.masses);
  j.at("kernels").get_to(s.kernels);
  s.r = matrix_from_json<BinaryIndicators>(j.at("r"));
  s.beta = matrix_from_json<Eigen::MatrixXd>(j.at("beta"));
  j.at("e").get_to(s.e);
  j.at("dynamic").get_to(s.dynamic);
  const auto K = static_cast<std::size_t>(s.topics.rows());
  if (s.masses.size() != K || s.kernels.size() != K || static_cast<std::size_t>(s.r.rows()) != K ||
      static_cast<std::size_t>(s.beta.rows()) != K) {
    throw FormatError("topic sample fields disagree on the number of topics");
  }
}

}  // namespace tcrm
