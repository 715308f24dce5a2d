// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "tcrm/error.hpp"
#include "tcrm/random.hpp"

namespace tcrm {

/// Beta process with Levy measure c pi^{-1} (1 - pi)^{c-1} dpi.
///
/// The truncated approximation draws masses from Be(1/K, 1 - 1/K) whatever
/// the concentration; `concentration` is carried for bookkeeping.
struct BetaProcess {
  double concentration = 1.0;
};

/// Gamma process with Levy measure gamma pi^{-1} exp(-rate pi) dpi.
/// Truncated masses are drawn from Ga(gamma / K, rate).
struct GammaProcess {
  double mass = 1.0;
  double rate = 1.0;
};

struct LevySpec {
  std::variant<BetaProcess, GammaProcess> family = GammaProcess{};
  std::size_t truncation = 1;

  bool is_beta() const { return std::holds_alternative<BetaProcess>(family); }

  void validate() const {
    if (truncation < 1) throw ParameterError("truncation level must be positive");
    if (const auto* b = std::get_if<BetaProcess>(&family)) {
      if (truncation < 2) throw ParameterError("beta-process truncation needs K >= 2");
      if (!(b->concentration > 0.0)) throw ParameterError("beta concentration must be positive");
    } else {
      const auto& g = std::get<GammaProcess>(family);
      if (!(g.mass > 0.0) || !(g.rate > 0.0)) {
        throw ParameterError("gamma-process parameters must be positive");
      }
    }
  }

  /// One draw of an atom mass from the truncation law.
  double draw_mass(Rng& rng) const {
    const double k = static_cast<double>(truncation);
    if (is_beta()) return tcrm::beta(rng, 1.0 / k, 1.0 - 1.0 / k);
    const auto& g = std::get<GammaProcess>(family);
    return tcrm::gamma(rng, g.mass / k, g.rate);
  }
};

/// One point (x_k, theta_k, pi_k) of the Poisson process on the augmented space.
template <class Theta, class Location>
struct Atom {
  double mass = 0.0;
  Theta theta{};
  Location location{};
};

template <class Theta, class Location>
struct TruncatedCRM {
  using atom_type = Atom<Theta, Location>;

  LevySpec spec;
  std::vector<atom_type> atoms;

  std::size_t size() const { return atoms.size(); }

  std::vector<double> masses() const {
    std::vector<double> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(a.mass);
    return out;
  }

  void validate() const {
    spec.validate();
    detail::require_same_size(spec.truncation, atoms.size(), "truncated CRM atoms");
    const bool beta = spec.is_beta();
    for (const auto& a : atoms) {
      if (!(a.mass > 0.0) || (beta && !(a.mass < 1.0))) {
        throw InvariantViolation("atom mass outside the support of its process");
      }
    }
  }
};

/// Draws a K-atom truncation. Each atom uses its own substream, keyed by the
/// atom index, for its mass, parameter and location, in that order.
template <class ThetaSampler, class LocationSampler>
auto draw_truncated_crm(const LevySpec& spec, ThetaSampler&& sample_theta,
                        LocationSampler&& sample_location, Rng& rng) {
  using Theta = std::decay_t<std::invoke_result_t<ThetaSampler&, Rng&>>;
  using Location = std::decay_t<std::invoke_result_t<LocationSampler&, Rng&>>;
  spec.validate();
  TruncatedCRM<Theta, Location> crm;
  crm.spec = spec;
  crm.atoms.reserve(spec.truncation);
  const RngStreams streams(rng);
  for (std::size_t k = 0; k < spec.truncation; ++k) {
    Rng atom_rng = streams.at(k);
    Atom<Theta, Location> atom;
    atom.mass = spec.draw_mass(atom_rng);
    atom.theta = sample_theta(atom_rng);
    atom.location = sample_location(atom_rng);
    crm.atoms.push_back(std::move(atom));
  }
  return crm;
}

/// Masses only; parameters and locations are empty.
inline TruncatedCRM<std::monostate, std::monostate> draw_truncated_masses(const LevySpec& spec,
                                                                           Rng& rng) {
  const auto none = [](Rng&) { return std::monostate{}; };
  return draw_truncated_crm(spec, none, none, rng);
}

/// Sum_k p_k pi_k: the expected total mass of the thinned measure given the
/// atoms. With no probabilities every atom is kept.
template <class Theta, class Location>
double expected_mass(const TruncatedCRM<Theta, Location>& crm,
                     std::optional<std::span<const double>> thinning_probs = std::nullopt) {
  if (thinning_probs) detail::require_same_size(crm.size(), thinning_probs->size(), "expected_mass");
  double total = 0.0;
  for (std::size_t k = 0; k < crm.size(); ++k) {
    total += thinning_probs ? (*thinning_probs)[k] * crm.atoms[k].mass : crm.atoms[k].mass;
  }
  return total;
}

}  // namespace tcrm
