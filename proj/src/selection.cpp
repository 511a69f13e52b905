#include "forge/selection.hpp"

#include <limits>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/parallel.hpp"

namespace forge {

SelectionResult select_diverse_from(const ProgramDistanceMatrix& distances, int m, std::size_t seed) {
    const std::size_t n = distances.size();
    if (n == 0) throw ValidationError("selection over an empty distance matrix");
    if (m < 1) throw ValidationError(fmt::format("selection size must be >= 1, got {}", m));
    if (seed >= n) throw ValidationError(fmt::format("seed index {} out of range for {} programs", seed, n));
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(m), n);

    SelectionResult result;
    std::vector<bool> chosen(n, false);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    auto take = [&](std::size_t idx) {
        chosen[idx] = true;
        result.selected_indices.push_back(idx);
        if (!distances.ids().empty()) result.selected_ids.push_back(distances.ids()[idx]);
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], distances.at(j, idx));
    };
    take(seed);
    if (!distances.ids().empty()) result.seed_id = distances.ids()[seed];
    while (result.selected_indices.size() < want) {
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j)
            if (!chosen[j] && (best == n || nearest[j] > nearest[best])) best = j;
        result.min_distance_trace.push_back(nearest[best]);
        take(best);
    }
    return result;
}

SelectionResult select_diverse(const ProgramDistanceMatrix& distances, int m, Rng& rng) {
    if (distances.size() == 0) throw ValidationError("selection over an empty distance matrix");
    return select_diverse_from(distances, m, rng.index(distances.size()));
}

std::string SelectionGroup::key() const { return fmt::format("{}/{}", to_string(source), target_score); }

std::map<SelectionGroup, SelectionResult> select_per_bucket(
    const std::map<SelectionGroup, std::vector<SelectionCandidate>>& groups, int m, std::uint64_t seed, int workers) {
    std::vector<const std::pair<const SelectionGroup, std::vector<SelectionCandidate>>*> items;
    for (const auto& g : groups) {
        if (g.second.empty()) throw ValidationError("empty selection group " + g.first.key());
        items.push_back(&g);
    }
    std::vector<SelectionResult> results(items.size());
    parallel_for(items.size(), workers, [&](std::size_t i) {
        const auto& [group, programs] = *items[i];
        std::vector<std::string> ids;
        std::vector<TokenSeq> seqs;
        for (const auto& p : programs) {
            ids.push_back(p.id);
            seqs.push_back(lex(p.code, p.language));
        }
        Rng rng(derive_seed(seed, "select", group.key()));
        if (programs.size() == 1) {
            results[i] = select_diverse(ProgramDistanceMatrix(ids, {0.0}), m, rng);
            return;
        }
        results[i] = select_diverse(pairwise_matrix(ids, seqs), m, rng);
    });
    std::map<SelectionGroup, SelectionResult> out;
    for (std::size_t i = 0; i < items.size(); ++i) out.emplace(items[i]->first, std::move(results[i]));
    return out;
}

void to_json(Json& j, const SelectionResult& r) {
    j = Json{{"selected_ids", r.selected_ids},
             {"seed_id", r.seed_id},
             {"min_distance_trace", r.min_distance_trace}};
}

void from_json(const Json& j, SelectionResult& r) {
    j.at("selected_ids").get_to(r.selected_ids);
    j.at("seed_id").get_to(r.seed_id);
    j.at("min_distance_trace").get_to(r.min_distance_trace);
}

}  // namespace forge
