#pragma once

// Reaction networks viewed as continuous-time Markov chains on the
// nonnegative integer lattice: transition vectors, mass-action rate laws and
// the affine drift d(x) = Ax + B.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "driftbound/error.hpp"

namespace driftbound {

enum class NetworkErrc {
  UnknownSpecies,
  DuplicateSpecies,
  ZeroNetChange,
  OrderTooHigh,
  NonPositiveRate,
  NegativeState,
  NonlinearPresent,
};

using NetworkError = KindedError<NetworkErrc>;

struct Species {
  std::string name;
  std::size_t index = 0;

  bool operator==(const Species&) const = default;
};

/// Species index -> stoichiometric count. Ordered so that two reactions with
/// the same stoichiometry compare equal regardless of how they were written.
using Stoichiometry = std::map<std::size_t, int>;

struct Reaction {
  Stoichiometry reactants;
  Stoichiometry products;
  double rate_constant = 0.0;

  int order() const {
    int total = 0;
    for (const auto& [species, count] : reactants) total += count;
    return total;
  }

  bool operator==(const Reaction&) const = default;
};

/// Input form of a reaction, referencing species by name.
struct ReactionInput {
  std::vector<std::pair<std::string, int>> reactants;
  std::vector<std::pair<std::string, int>> products;
  double rate_constant = 0.0;
};

enum class RateLaw {
  Constant,     // q(x) = k
  Linear,       // q(x) = k x_i
  Bimolecular,  // q(x) = k x_i x_j, or k x_i (x_i - 1) when i == j
};

/// One jump x -> x + change with a mass-action rate.
struct Transition {
  Eigen::VectorXi change;
  RateLaw law = RateLaw::Constant;
  double rate_constant = 0.0;
  std::size_t first = 0;   // reactant species (Linear, Bimolecular)
  std::size_t second = 0;  // second reactant species (Bimolecular)

  bool is_affine() const { return law != RateLaw::Bimolecular; }

  /// Coefficients (a, c) of q(x) = aᵀx + c. Only meaningful for affine laws.
  std::pair<Eigen::VectorXd, double> affine_coefficients(Eigen::Index dim) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(dim);
    double c = 0.0;
    if (law == RateLaw::Constant) {
      c = rate_constant;
    } else if (law == RateLaw::Linear) {
      a(static_cast<Eigen::Index>(first)) = rate_constant;
    }
    return {a, c};
  }

  template <typename Count>
  double rate(std::span<const Count> x) const {
    switch (law) {
      case RateLaw::Constant:
        return rate_constant;
      case RateLaw::Linear:
        return rate_constant * static_cast<double>(x[first]);
      case RateLaw::Bimolecular:
        if (first == second) {
          const auto xi = static_cast<double>(x[first]);
          return rate_constant * xi * (xi - 1.0);
        }
        return rate_constant * static_cast<double>(x[first]) * static_cast<double>(x[second]);
    }
    return 0.0;
  }
};

class ReactionNetwork {
 public:
  ReactionNetwork() = default;

  const std::vector<Species>& species() const { return species_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  std::size_t dimension() const { return species_.size(); }

  std::vector<std::string> species_names() const {
    std::vector<std::string> names;
    names.reserve(species_.size());
    for (const auto& s : species_) names.push_back(s.name);
    return names;
  }

  /// Index of a species by name, or npos.
  std::size_t find_species(const std::string& name) const {
    for (const auto& s : species_) {
      if (s.name == name) return s.index;
    }
    return npos;
  }

  bool operator==(const ReactionNetwork& other) const {
    return species_ == other.species_ && reactions_ == other.reactions_;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  friend ReactionNetwork build_network(const std::vector<std::string>&,
                                       const std::vector<Reaction>&);

  std::vector<Species> species_;
  std::vector<Reaction> reactions_;
  std::vector<Transition> transitions_;
};

namespace detail {

inline Transition make_transition(const Reaction& reaction, std::size_t dim) {
  Transition t;
  t.change = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& [s, count] : reaction.products) t.change(static_cast<Eigen::Index>(s)) += count;
  for (const auto& [s, count] : reaction.reactants) t.change(static_cast<Eigen::Index>(s)) -= count;
  t.rate_constant = reaction.rate_constant;

  std::vector<std::size_t> units;
  for (const auto& [s, count] : reaction.reactants) {
    for (int c = 0; c < count; ++c) units.push_back(s);
  }
  switch (units.size()) {
    case 0:
      t.law = RateLaw::Constant;
      break;
    case 1:
      t.law = RateLaw::Linear;
      t.first = units[0];
      break;
    default:
      t.law = RateLaw::Bimolecular;
      t.first = units[0];
      t.second = units[1];
      break;
  }
  return t;
}

}  // namespace detail

/// Validates and assembles a network from species indices already resolved.
inline ReactionNetwork build_network(const std::vector<std::string>& species,
                                     const std::vector<Reaction>& reactions) {
  ReactionNetwork net;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < species.size(); ++i) {
    if (!seen.insert(species[i]).second) {
      throw NetworkError(NetworkErrc::DuplicateSpecies, "duplicate species '" + species[i] + "'");
    }
    net.species_.push_back({species[i], i});
  }
  for (std::size_t r = 0; r < reactions.size(); ++r) {
    const Reaction& reaction = reactions[r];
    const std::string where = "reaction " + std::to_string(r + 1);
    for (const auto* side : {&reaction.reactants, &reaction.products}) {
      for (const auto& [s, count] : *side) {
        if (s >= species.size()) {
          throw NetworkError(NetworkErrc::UnknownSpecies, where + ": species index out of range");
        }
        if (count <= 0) {
          throw NetworkError(NetworkErrc::ZeroNetChange, where + ": stoichiometric counts must be positive");
        }
      }
    }
    if (!(reaction.rate_constant > 0.0) || !std::isfinite(reaction.rate_constant)) {
      throw NetworkError(NetworkErrc::NonPositiveRate, where + ": rate constant must be positive and finite");
    }
    if (reaction.order() > 2) {
      throw NetworkError(NetworkErrc::OrderTooHigh,
                         where + ": reactant order " + std::to_string(reaction.order()) + " exceeds 2");
    }
    Transition t = detail::make_transition(reaction, species.size());
    if (t.change.isZero()) {
      throw NetworkError(NetworkErrc::ZeroNetChange, where + ": net change vector is zero");
    }
    net.reactions_.push_back(reaction);
    net.transitions_.push_back(std::move(t));
  }
  return net;
}

/// Name-based overload; resolves species names to indices first.
inline ReactionNetwork build_network(const std::vector<std::string>& species,
                                     const std::vector<ReactionInput>& reactions) {
  auto resolve = [&](const std::vector<std::pair<std::string, int>>& side, std::size_t r) {
    Stoichiometry out;
    for (const auto& [name, count] : side) {
      auto it = std::find(species.begin(), species.end(), name);
      if (it == species.end()) {
        throw NetworkError(NetworkErrc::UnknownSpecies,
                           "reaction " + std::to_string(r + 1) + ": unknown species '" + name + "'");
      }
      out[static_cast<std::size_t>(it - species.begin())] += count;
    }
    return out;
  };
  std::vector<Reaction> resolved;
  resolved.reserve(reactions.size());
  for (std::size_t r = 0; r < reactions.size(); ++r) {
    resolved.push_back({resolve(reactions[r].reactants, r), resolve(reactions[r].products, r),
                        reactions[r].rate_constant});
  }
  return build_network(species, resolved);
}

struct RatePartition {
  std::vector<std::size_t> affine;     // indices of order-0 and order-1 transitions
  std::vector<std::size_t> nonlinear;  // indices of order-2 transitions
};

inline RatePartition classify_rates(const ReactionNetwork& net) {
  RatePartition p;
  const auto& ts = net.transitions();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    (ts[k].is_affine() ? p.affine : p.nonlinear).push_back(k);
  }
  return p;
}

struct DriftPair {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return A * x + B; }
};

enum class DriftScope {
  AffinePart,    // sum over affine transitions; order-2 ones are the caller's business
  StrictAffine,  // refuse networks with order-2 transitions
};

/// A = Σ r_k a_kᵀ, B = Σ r_k c_k over the affine transitions.
inline DriftPair drift_matrices(const ReactionNetwork& net, DriftScope scope = DriftScope::AffinePart) {
  const auto n = static_cast<Eigen::Index>(net.dimension());
  DriftPair d{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (const auto& t : net.transitions()) {
    if (!t.is_affine()) {
      if (scope == DriftScope::StrictAffine) {
        throw NetworkError(NetworkErrc::NonlinearPresent,
                           "network has order-2 transitions; drift is not affine");
      }
      continue;
    }
    const Eigen::VectorXd r = t.change.cast<double>();
    const auto [a, c] = t.affine_coefficients(n);
    d.A += r * a.transpose();
    d.B += c * r;
  }
  return d;
}

template <typename Count>
Eigen::VectorXd propensity(const ReactionNetwork& net, std::span<const Count> state) {
  if (state.size() != net.dimension()) {
    throw NetworkError(NetworkErrc::NegativeState, "state dimension does not match species count");
  }
  for (const auto v : state) {
    if (v < 0) throw NetworkError(NetworkErrc::NegativeState, "state has a negative component");
  }
  const auto& ts = net.transitions();
  Eigen::VectorXd q(static_cast<Eigen::Index>(ts.size()));
  for (std::size_t k = 0; k < ts.size(); ++k) q(static_cast<Eigen::Index>(k)) = ts[k].rate(state);
  return q;
}

inline Eigen::VectorXd propensity(const ReactionNetwork& net, const std::vector<std::int64_t>& state) {
  return propensity(net, std::span<const std::int64_t>(state));
}

}  // namespace driftbound
