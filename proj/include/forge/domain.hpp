#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace forge {

using Json = nlohmann::json;

// Refinement-effort score, 0 (rewrite) .. 5 (production-ready).
using Score = int;
inline constexpr Score kMinScore = 0;
inline constexpr Score kMaxScore = 5;

enum class Source { bigcodebench, livecodebench, apps, aider_polyglot, custom };
enum class Language { python, cpp, java };
enum class TestMode { stdin_stdout, harness_command };
enum class Origin { reference, augmented, perturbed, disrupted };
enum class FunctionalStatus { untested, pass, fail, timeout, sandbox_violation, env_error };

std::string_view to_string(Source s);
std::string_view to_string(Language l);
std::string_view to_string(Origin o);
std::string_view to_string(FunctionalStatus s);
Language parse_language(std::string_view s);
Source parse_source(std::string_view s);

struct TestCase {
    std::string id;
    TestMode mode = TestMode::stdin_stdout;
    std::string input;            // stdin mode
    std::string expected_output;  // stdin mode
    std::string command;          // harness mode
    double timeout = 10.0;        // seconds

    void validate() const;
};

struct Requirement {
    std::string id;
    Source source = Source::custom;
    Language language = Language::python;
    std::string statement;
    std::vector<TestCase> tests;
    std::vector<std::string> reference_program_ids;

    void validate() const;
};

struct Program {
    std::string id;
    std::string requirement_id;
    std::string code;
    Origin origin = Origin::reference;
    std::optional<std::string> parent_id;
    std::vector<std::string> rule_ids;
    Score target_score = kMaxScore;
    FunctionalStatus functional_status = FunctionalStatus::untested;
    std::optional<Score> final_score;

    void validate() const;
};

struct PerturbationRule {
    std::string id;
    std::string instruction;
    Score ceiling = kMaxScore;
    std::string category;

    void validate() const;
};

// Rules grouped by score ceiling (U_c).
class RuleSet {
public:
    RuleSet() = default;
    explicit RuleSet(std::vector<PerturbationRule> rules);

    std::span<const PerturbationRule> bucket(Score ceiling) const;
    const PerturbationRule* find(std::string_view id) const;
    std::size_t size() const noexcept { return by_id_.size(); }

    // Throws ConfigError when any of the given ceilings has no rules.
    void require_buckets(std::span<const Score> ceilings) const;

private:
    std::array<std::vector<PerturbationRule>, kMaxScore + 1> buckets_;
    std::map<std::string, std::pair<Score, std::size_t>, std::less<>> by_id_;
};

struct PipelineConfig {
    int programs_per_score = 2;         // M
    int candidates_per_group = 90;      // m
    int max_steps_exemplar = 1;
    int max_steps_deteriorate = 5;
    double softmax_temperature = 0.03;  // tau
    double sampling_temperature = 0.3;
    int max_output_tokens = 8192;
    std::uint64_t rng_seed = 0;
    int attempts_per_quota = 10;        // max_attempts = factor * quota
    bool references_count_toward_quota = true;

    void validate() const;
};

void check_score(Score s, std::string_view what);

void to_json(Json& j, const TestCase& t);
void from_json(const Json& j, TestCase& t);
void to_json(Json& j, const Requirement& r);
void from_json(const Json& j, Requirement& r);
void to_json(Json& j, const Program& p);
void from_json(const Json& j, Program& p);
void to_json(Json& j, const PerturbationRule& r);
void from_json(const Json& j, PerturbationRule& r);

void to_json(Json& j, Source v);
void from_json(const Json& j, Source& v);
void to_json(Json& j, Language v);
void from_json(const Json& j, Language& v);
void to_json(Json& j, TestMode v);
void from_json(const Json& j, TestMode& v);
void to_json(Json& j, Origin v);
void from_json(const Json& j, Origin& v);
void to_json(Json& j, FunctionalStatus v);
void from_json(const Json& j, FunctionalStatus& v);

}  // namespace forge
