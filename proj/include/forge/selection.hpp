#pragma once

#include <map>
#include <string>
#include <vector>

#include "forge/domain.hpp"
#include "forge/rng.hpp"
#include "forge/similarity.hpp"

namespace forge {

struct SelectionResult {
    std::vector<std::string> selected_ids;
    std::vector<std::size_t> selected_indices;
    std::string seed_id;
    // Maximized min-distance at each pick after the seed.
    std::vector<double> min_distance_trace;
};

// Farthest-point greedy: random seed, then repeatedly the unselected program
// whose minimum distance to the selected set is largest (lowest index on
// ties), until min(m, N) are chosen.
SelectionResult select_diverse(const ProgramDistanceMatrix& distances, int m, Rng& rng);
SelectionResult select_diverse_from(const ProgramDistanceMatrix& distances, int m, std::size_t seed);

struct SelectionCandidate {
    std::string id;
    std::string code;
    Language language = Language::python;
};

struct SelectionGroup {
    Source source = Source::custom;
    Score target_score = 0;

    std::string key() const;
    auto operator<=>(const SelectionGroup&) const = default;
};

// Groups programs by (source benchmark, target score) and runs the greedy
// per group with a group-derived RNG stream.
std::map<SelectionGroup, SelectionResult> select_per_bucket(
    const std::map<SelectionGroup, std::vector<SelectionCandidate>>& groups, int m, std::uint64_t seed,
    int workers = 1);

void to_json(Json& j, const SelectionResult& r);
void from_json(const Json& j, SelectionResult& r);

}  // namespace forge
