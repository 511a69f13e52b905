#pragma once

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "forge/domain.hpp"
#include "forge/error.hpp"
#include "forge/llm.hpp"
#include "forge/prompts.hpp"

namespace forge {

enum class Metric { ice, codejudge, chrfpp, codebleu, editsim };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);
bool is_llm_metric(Metric m);

struct FaultItem {
    std::string location;
    std::string category;
    std::string severity;
    std::string explanation;
};

struct Judgment {
    std::string program_id;
    Metric metric = Metric::ice;
    std::string model;  // empty for rule-based metrics
    int run = 1;
    Score score = 0;
    std::string rationale;
    std::optional<std::vector<FaultItem>> fault_report;
    std::string template_digest;

    void validate() const;
};

// A judge could not produce a usable score.
class JudgmentError : public Error {
public:
    using Error::Error;
};

struct JudgeContext {
    Gateway* gateway = nullptr;
    const PromptLibrary* prompts = nullptr;
    std::string criteria;  // the 0-5 scale text inserted into every prompt
    double temperature = 0.0;
    int max_output_tokens = 2048;
};

// Last integer in the text; "N/5" yields N.
std::optional<int> parse_score(std::string_view text);

// Fault list from pass-1 output: bare JSON, a fenced block, or the outermost
// [...] span. nullopt when no valid list is found.
std::optional<std::vector<FaultItem>> parse_fault_report(std::string_view text);

Judgment judge_ice(const Requirement& requirement, const Program& program, const std::string& model,
                   const JudgeContext& ctx, const std::string& salt = {});
Judgment judge_codejudge(const Requirement& requirement, const Program& program, const std::string& model,
                         const JudgeContext& ctx, const std::string& salt = {});

struct JudgeSample {
    const Program* program = nullptr;
    const Requirement* requirement = nullptr;
    std::string reference_code;  // verified reference of the requirement
};

// Raw similarity of a rule-based metric (chrF++ in [0,100], others in [0,1]).
double rule_based_raw(Metric metric, const std::string& candidate, const std::string& reference,
                      Language language);

using JudgmentKey = std::tuple<std::string, std::string, std::string, int>;  // program, metric, model, run
JudgmentKey key_of(const Judgment& j);

struct MatrixOptions {
    std::vector<Metric> metrics;
    std::vector<std::string> models;  // LLM judges run once per model
    int runs = 1;
    bool salt_runs = false;  // distinct cache entries per run (live sampling)
    int workers = 1;
};

struct JudgeFailure {
    JudgmentKey key;
    std::string message;
};

struct MatrixResult {
    std::vector<Judgment> judgments;  // new ones only, deterministic order
    std::vector<JudgeFailure> failures;
    std::size_t skipped = 0;
};

// runs x metrics x samples (x models for LLM judges). Tuples in `done` are
// skipped; per-judgment failures are collected and the matrix continues.
MatrixResult run_judging_matrix(const std::vector<JudgeSample>& samples, const MatrixOptions& options,
                                const JudgeContext& ctx, const std::set<JudgmentKey>& done);

void to_json(Json& j, const FaultItem& f);
void from_json(const Json& j, FaultItem& f);
void to_json(Json& j, const Judgment& r);
void from_json(const Json& j, Judgment& r);

}  // namespace forge
