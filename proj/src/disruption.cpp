#include "forge/disruption.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/parallel.hpp"

namespace forge {

RequirementDistanceMatrix build_distance_matrix(const std::vector<std::string>& ids,
                                                const std::vector<EmbeddingVector>& vectors, int workers) {
    if (ids.size() != vectors.size()) throw ValidationError("one embedding per requirement expected");
    const std::size_t n = ids.size();
    if (n < 2) throw ValidationError("distance matrix needs at least 2 requirements");
    const std::size_t dim = vectors[0].values.size();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].values.size() != dim)
            throw ValidationError(fmt::format("embedding of {} has dimension {}, expected {}", ids[i],
                                              vectors[i].values.size(), dim));
        double sq = 0.0;
        for (double v : vectors[i].values) sq += v * v;
        norms[i] = std::sqrt(sq);
        if (norms[i] == 0.0) throw ValidationError("zero-norm embedding for requirement " + ids[i]);
    }
    RequirementDistanceMatrix m{ids, std::vector<double>(n * n)};
    parallel_for(n, workers, [&](std::size_t i) {
        m.d[i * n + i] = -std::numeric_limits<double>::infinity();
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += vectors[i].values[k] * vectors[j].values[k];
            double cosine = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
            double dist = 1.0 - cosine;
            m.d[i * n + j] = dist;
            m.d[j * n + i] = dist;
        }
    });
    return m;
}

std::vector<double> softmax_row(const RequirementDistanceMatrix& matrix, std::size_t i, double tau,
                                const std::vector<bool>& excluded) {
    if (!(tau > 0.0)) throw ValidationError("softmax temperature must be > 0");
    const std::size_t n = matrix.size();
    std::vector<double> p(n, 0.0);
    double top = -std::numeric_limits<double>::infinity();
    auto live = [&](std::size_t j) {
        return j != i && (excluded.empty() || !excluded[j]) && std::isfinite(matrix.at(i, j));
    };
    for (std::size_t j = 0; j < n; ++j)
        if (live(j)) top = std::max(top, matrix.at(i, j) / tau);
    if (!std::isfinite(top)) return p;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        if (live(j)) total += p[j] = std::exp(matrix.at(i, j) / tau - top);
    for (double& v : p) v /= total;
    return p;
}

std::vector<std::size_t> sample_distant(std::size_t i, const RequirementDistanceMatrix& matrix, int count,
                                        double tau, Rng& rng) {
    const std::size_t n = matrix.size();
    if (count < 0 || static_cast<std::size_t>(count) >= n)
        throw ValidationError(fmt::format("cannot draw {} distinct requirements out of {} others", count,
                                          n == 0 ? 0 : n - 1));
    std::vector<bool> taken(n, false);
    std::vector<std::size_t> out;
    for (int draw = 0; draw < count; ++draw) {
        auto p = softmax_row(matrix, i, tau, taken);
        double u = rng.uniform01();
        std::size_t pick = n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (p[j] <= 0.0) continue;
            pick = j;
            acc += p[j];
            if (u < acc) break;
        }
        if (pick == n) throw ValidationError("no candidate requirement left to sample");
        taken[pick] = true;
        out.push_back(pick);
    }
    return out;
}

std::vector<Program> make_zero_pairs(const RequirementDistanceMatrix& matrix, const std::vector<Program>& programs,
                                     int per_requirement, double tau, std::uint64_t seed) {
    const std::size_t n = matrix.size();
    if (per_requirement < 1) throw ValidationError("disruption count must be >= 1");
    if (n < static_cast<std::size_t>(per_requirement) + 1)
        throw ValidationError(fmt::format("context disruption needs at least {} requirements, have {}",
                                          per_requirement + 1, n));
    std::map<std::string, std::vector<const Program*>> pool;
    for (const auto& p : programs)
        if (p.origin != Origin::disrupted) pool[p.requirement_id].push_back(&p);
    for (auto& [id, list] : pool)
        std::sort(list.begin(), list.end(), [](const Program* a, const Program* b) { return a->id < b->id; });
    for (const auto& id : matrix.ids)
        if (pool[id].empty()) throw ValidationError("requirement " + id + " has no programs to disrupt with");

    std::vector<Program> out;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "disrupt", matrix.ids[i]));
        auto foreign = sample_distant(i, matrix, per_requirement, tau, rng);
        int k = 0;
        for (std::size_t j : foreign) {
            const auto& candidates = pool[matrix.ids[j]];
            const Program& src = *candidates[rng.index(candidates.size())];
            Program p;
            p.id = fmt::format("{}-zero-{}", matrix.ids[i], k++);
            p.requirement_id = matrix.ids[i];
            p.code = src.code;
            p.origin = Origin::disrupted;
            p.parent_id = src.id;
            p.target_score = 0;
            p.final_score = 0;
            out.push_back(std::move(p));
        }
    }
    return out;
}

}  // namespace forge
