#pragma once

#include <random>
#include <utility>

#include "reallocation/arrow_debreu.hpp"
#include "reallocation/combinatorial.hpp"
#include "reallocation/distributions.hpp"
#include "reallocation/partnership.hpp"

// Seeded instance generators shared by the CLI, the tests and the acceptance
// suite. Values are rounded to multiples of 1/1000 so that generated
// instances print and re-parse exactly.
namespace reallocation::corpus {

/// 1..max_atoms distinct atoms in [0, max_value]. Random probabilities unless
/// `equal_probability`.
DiscreteDist random_discrete(std::mt19937_64& rng, int max_atoms, double max_value,
                             bool equal_probability = false);

/// Seller half uniform on (0, eps), half on (1, 1 + eps), as `atoms`
/// equal-probability atoms at bucket midpoints. The buyer is a point mass at
/// `buyer_value`; a huge value stands in for an unbounded buyer.
std::pair<DiscreteDist, DiscreteDist> two_cluster_instance(double eps, int atoms,
                                                           double buyer_value);

/// Values uniform in [0, max_value); shares random, summing to 1.
partnership::Instance random_partnership(std::mt19937_64& rng, std::size_t agents,
                                         double max_value);

/// Random concave piecewise-linear valuation with 1..max_pieces pieces.
arrow_debreu::ConcaveFn random_concave(std::mt19937_64& rng, int max_pieces, double max_slope);

/// Random market with 3 <= agents and every endowment at most 1/3.
arrow_debreu::Instance random_market(std::mt19937_64& rng, std::size_t agents, int max_pieces,
                                     double max_slope);

enum class ValuationForm { Additive, UnitDemand };

/// Item values drawn from {0, 1, ..., levels - 1}.
combinatorial::SetValuation random_valuation(std::mt19937_64& rng, int items, int levels,
                                             ValuationForm form);

}  // namespace reallocation::corpus
