#pragma once

#include <map>
#include <string>
#include <vector>

#include "forge/domain.hpp"
#include "forge/llm.hpp"
#include "forge/rng.hpp"

namespace forge {

// Cosine distances between requirement embeddings. The diagonal holds -inf
// so that a requirement never samples itself.
struct RequirementDistanceMatrix {
    std::vector<std::string> ids;
    std::vector<double> d;  // row-major n x n

    std::size_t size() const noexcept { return ids.size(); }
    double at(std::size_t i, std::size_t j) const { return d[i * ids.size() + j]; }
};

RequirementDistanceMatrix build_distance_matrix(const std::vector<std::string>& ids,
                                                const std::vector<EmbeddingVector>& vectors,
                                                int workers = 1);

// Single-draw probabilities p_ij ∝ exp(d_ij / tau) over j not in `excluded`
// (and j != i), computed with the maximum exponent subtracted.
std::vector<double> softmax_row(const RequirementDistanceMatrix& matrix, std::size_t i, double tau,
                                const std::vector<bool>& excluded = {});

// `count` distinct indices j != i, drawn one at a time from the softmax,
// renormalizing over the remaining indices after each draw.
std::vector<std::size_t> sample_distant(std::size_t i, const RequirementDistanceMatrix& matrix,
                                        int count, double tau, Rng& rng);

// For every requirement, M distant foreign requirements, each contributing
// one uniformly chosen program of theirs, cloned as a 0-point sample of the
// first requirement. Disrupted programs are never used as sources.
std::vector<Program> make_zero_pairs(const RequirementDistanceMatrix& matrix,
                                     const std::vector<Program>& programs, int per_requirement,
                                     double tau, std::uint64_t seed);

}  // namespace forge
