#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "forge/domain.hpp"
#include "forge/rng.hpp"

namespace forge {

// Score of a program after applying rules with the given ceilings to a
// program scored `base`: min(base, ceilings...).
Score score_after_perturbation(Score base, std::span<const Score> ceilings);

// Draws `n_steps` ceilings uniformly from [target, 5] and pins one uniformly
// chosen position to `target`, so the minimum is exactly `target`.
// target 0 is rejected: 0-point programs only come from context disruption.
std::vector<Score> sample_ceilings(Score target, int n_steps, Rng& rng);

// Reads a rule pack: one JSON object per line with id, ceiling, category and
// instruction. Blank lines and lines starting with '#' are skipped.
RuleSet load_rule_pack(const std::filesystem::path& path);

}  // namespace forge
