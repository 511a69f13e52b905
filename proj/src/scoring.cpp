#include "forge/scoring.hpp"

#include <algorithm>

#include "forge/error.hpp"
#include "forge/jsonl.hpp"

namespace forge {

Score score_after_perturbation(Score base, std::span<const Score> ceilings) {
    Score s = base;
    for (Score c : ceilings) s = std::min(s, c);
    return s;
}

std::vector<Score> sample_ceilings(Score target, int n_steps, Rng& rng) {
    if (target < 1 || target > kMaxScore)
        throw ValidationError("ceiling target must be in 1..5, got " + std::to_string(target));
    if (n_steps < 1) throw ValidationError("step count must be >= 1");
    std::vector<Score> ceilings(static_cast<std::size_t>(n_steps));
    for (auto& c : ceilings) c = static_cast<Score>(rng.uniform_int(target, kMaxScore));
    ceilings[rng.index(ceilings.size())] = target;
    return ceilings;
}

RuleSet load_rule_pack(const std::filesystem::path& path) {
    std::vector<PerturbationRule> rules;
    for_each_jsonl(path, [&](const Json& j, std::size_t) {
        auto rule = j.get<PerturbationRule>();
        rule.validate();
        rules.push_back(std::move(rule));
    });
    return RuleSet(std::move(rules));
}

}  // namespace forge
