#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "driftbound/reaction_dsl.hpp"

namespace fixtures {

inline std::string model_path(const std::string& name) { return std::string(DRIFTBOUND_MODELS) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline driftbound::ReactionNetwork load(const std::string& name) {
  return driftbound::parse_model(read_text(model_path(name)), name);
}

/// Random network with up to `max_species` species and `max_reactions`
/// reactions of order ≤ 2. Rates are small integers when `integer_rates`.
inline driftbound::ReactionNetwork random_network(std::mt19937_64& rng, std::size_t max_species,
                                                  std::size_t max_reactions, bool allow_bimolecular = true,
                                                  bool integer_rates = false) {
  using namespace driftbound;
  std::uniform_int_distribution<std::size_t> ns(1, max_species);
  const std::size_t n = ns(rng);
  std::vector<std::string> species;
  for (std::size_t i = 0; i < n; ++i) species.push_back("s" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> nr(0, max_reactions);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<int> order(0, allow_bimolecular ? 2 : 1);
  std::uniform_int_distribution<int> nprod(0, 2);
  std::uniform_int_distribution<int> irate(1, 50);
  std::uniform_real_distribution<double> lrate(-3.0, 3.0);
  std::vector<Reaction> reactions;
  const std::size_t m = nr(rng);
  while (reactions.size() < m) {
    Reaction r;
    for (int k = order(rng); k > 0; --k) r.reactants[pick(rng)] += 1;
    for (int k = nprod(rng); k > 0; --k) r.products[pick(rng)] += 1;
    if (r.reactants == r.products) continue;
    r.rate_constant = integer_rates ? irate(rng) : std::pow(10.0, lrate(rng));
    reactions.push_back(r);
  }
  return build_network(species, reactions);
}

}  // namespace fixtures
