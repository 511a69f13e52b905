#pragma once

#include <optional>
#include <string>
#include <vector>

#include "forge/domain.hpp"
#include "forge/llm.hpp"
#include "forge/prompts.hpp"
#include "forge/rng.hpp"
#include "forge/sandbox.hpp"

namespace forge {

struct PerturbationStepTrace {
    std::string program_id;
    int step_index = 1;
    std::string rule_id;
    bool feasible = true;
    std::string model;
    std::string request_hash;
    std::string output_hash;  // empty when the step produced no program
};

struct BucketSpec {
    std::string requirement_id;
    Score target_score = 5;
    int quota = 2;
    int max_attempts = 20;

    void validate() const;
};

// Everything the engine needs to talk to the LLM.
struct PerturbationContext {
    Gateway* gateway = nullptr;
    const PromptLibrary* prompts = nullptr;
    std::vector<std::string> models;  // one is drawn uniformly per step
    double temperature = 0.3;
    int max_output_tokens = 8192;
};

struct PerturbOutcome {
    enum class Kind { perturbed, refused, step_error };
    Kind kind = Kind::step_error;
    std::string code;
    std::string request_hash;
    std::string message;
};

// One rule application: feasibility, plan, full program in a fenced block.
// A reply without a code block that says INFEASIBLE is a refusal; any other
// reply without a block gets one corrective re-prompt.
PerturbOutcome perturb_once(const std::string& code, const Requirement& requirement,
                            const PerturbationRule& rule, const std::string& model,
                            const std::string& salt, const PerturbationContext& ctx);

struct MultiStepResult {
    std::optional<Program> program;
    std::vector<PerturbationStepTrace> trace;
};

// Draws N in [1, n_max] and N ceilings with minimum `target`, applies one
// uniformly chosen rule per ceiling in sequence. Any refusal or step error
// abandons the whole chain.
MultiStepResult multi_step_perturb(const Program& seed, const Requirement& requirement, Score target,
                                   const RuleSet& rules, int n_max, Rng& rng,
                                   const PerturbationContext& ctx, const std::string& program_id);

struct BucketResult {
    std::vector<Program> programs;
    std::vector<TestReport> reports;  // one per kept program
    std::vector<PerturbationStepTrace> traces;
    std::vector<Json> log;
    int attempts = 0;
};

// Grows the 5-point pool of a requirement with semantics-preserving
// rewrites of existing 5-point programs until it holds M programs.
BucketResult augment_exemplars(const Requirement& requirement, const std::vector<Program>& seeds,
                               const RuleSet& rules, const PipelineConfig& config,
                               const Sandbox& sandbox, Rng& rng, const PerturbationContext& ctx);

// Deteriorative generation for one (requirement, target) bucket; targets 3
// and 4 must pass every test, targets 1 and 2 must fail at least one.
BucketResult generate_bucket(const BucketSpec& spec, const Requirement& requirement,
                             const std::vector<Program>& seeds, const RuleSet& rules,
                             const PipelineConfig& config, const Sandbox& sandbox, Rng& rng,
                             const PerturbationContext& ctx);

// Status a target score demands: pass for 3..5, fail for 1..2.
FunctionalStatus required_status(Score target);

void to_json(Json& j, const PerturbationStepTrace& t);
void from_json(const Json& j, PerturbationStepTrace& t);

}  // namespace forge
