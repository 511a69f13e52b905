#include "forge/domain.hpp"

#include <algorithm>
#include <utility>

#include "forge/error.hpp"

namespace forge {

namespace {

template <class E, std::size_t N>
using EnumTable = std::array<std::pair<E, std::string_view>, N>;

constexpr EnumTable<Source, 5> kSources{{{Source::bigcodebench, "bigcodebench"},
                                         {Source::livecodebench, "livecodebench"},
                                         {Source::apps, "apps"},
                                         {Source::aider_polyglot, "aider-polyglot"},
                                         {Source::custom, "custom"}}};
constexpr EnumTable<Language, 3> kLanguages{{{Language::python, "python"},
                                             {Language::cpp, "cpp"},
                                             {Language::java, "java"}}};
constexpr EnumTable<TestMode, 2> kModes{{{TestMode::stdin_stdout, "stdin-stdout"},
                                         {TestMode::harness_command, "harness-command"}}};
constexpr EnumTable<Origin, 4> kOrigins{{{Origin::reference, "reference"},
                                         {Origin::augmented, "augmented"},
                                         {Origin::perturbed, "perturbed"},
                                         {Origin::disrupted, "disrupted"}}};
constexpr EnumTable<FunctionalStatus, 6> kStatuses{
    {{FunctionalStatus::untested, "untested"},
     {FunctionalStatus::pass, "pass"},
     {FunctionalStatus::fail, "fail"},
     {FunctionalStatus::timeout, "timeout"},
     {FunctionalStatus::sandbox_violation, "sandbox_violation"},
     {FunctionalStatus::env_error, "env_error"}}};

template <class E, std::size_t N>
std::string_view name_of(const EnumTable<E, N>& table, E v) {
    for (const auto& [e, name] : table)
        if (e == v) return name;
    return "?";
}

template <class E, std::size_t N>
E value_of(const EnumTable<E, N>& table, std::string_view name, std::string_view kind) {
    for (const auto& [e, n] : table)
        if (n == name) return e;
    std::string known;
    for (const auto& [e, n] : table) {
        if (!known.empty()) known += ", ";
        known += n;
    }
    throw ValidationError("unknown " + std::string(kind) + " '" + std::string(name) +
                          "' (expected one of: " + known + ")");
}

template <class T>
void get_optional(const Json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace

std::string_view to_string(Source s) { return name_of(kSources, s); }
std::string_view to_string(Language l) { return name_of(kLanguages, l); }
std::string_view to_string(Origin o) { return name_of(kOrigins, o); }
std::string_view to_string(FunctionalStatus s) { return name_of(kStatuses, s); }
Language parse_language(std::string_view s) { return value_of(kLanguages, s, "language"); }
Source parse_source(std::string_view s) { return value_of(kSources, s, "source"); }

void to_json(Json& j, Source v) { j = name_of(kSources, v); }
void from_json(const Json& j, Source& v) { v = value_of(kSources, j.get<std::string>(), "source"); }
void to_json(Json& j, Language v) { j = name_of(kLanguages, v); }
void from_json(const Json& j, Language& v) { v = value_of(kLanguages, j.get<std::string>(), "language"); }
void to_json(Json& j, TestMode v) { j = name_of(kModes, v); }
void from_json(const Json& j, TestMode& v) { v = value_of(kModes, j.get<std::string>(), "test mode"); }
void to_json(Json& j, Origin v) { j = name_of(kOrigins, v); }
void from_json(const Json& j, Origin& v) { v = value_of(kOrigins, j.get<std::string>(), "origin"); }
void to_json(Json& j, FunctionalStatus v) { j = name_of(kStatuses, v); }
void from_json(const Json& j, FunctionalStatus& v) {
    v = value_of(kStatuses, j.get<std::string>(), "functional status");
}

void check_score(Score s, std::string_view what) {
    if (s < kMinScore || s > kMaxScore)
        throw ValidationError(std::string(what) + " " + std::to_string(s) + " outside 0..5");
}

void TestCase::validate() const {
    if (id.empty()) throw ValidationError("test case without id");
    if (!(timeout > 0)) throw ValidationError("test " + id + ": timeout must be positive");
    if (mode == TestMode::stdin_stdout && !command.empty())
        throw ValidationError("test " + id + ": stdin-stdout test carries a command");
    if (mode == TestMode::harness_command &&
        (command.empty() || !input.empty() || !expected_output.empty()))
        throw ValidationError("test " + id + ": harness test needs exactly a command");
}

void Requirement::validate() const {
    if (id.empty()) throw ValidationError("requirement without id");
    if (tests.empty()) throw ValidationError("requirement " + id + " has no tests");
    for (const auto& t : tests) t.validate();
}

void Program::validate() const {
    if (id.empty()) throw ValidationError("program without id");
    check_score(target_score, "program " + id + ": target_score");
    if (final_score) check_score(*final_score, "program " + id + ": final_score");
    switch (origin) {
        case Origin::reference:
            if (parent_id) throw ValidationError("reference program " + id + " has a parent");
            if (target_score != kMaxScore)
                throw ValidationError("reference program " + id + " must target 5");
            break;
        case Origin::disrupted:
            if (target_score != 0 || final_score != 0)
                throw ValidationError("disrupted program " + id + " must carry score 0");
            break;
        case Origin::perturbed:
            if (rule_ids.empty())
                throw ValidationError("perturbed program " + id + " has no rules");
            break;
        case Origin::augmented:
            break;
    }
}

void PerturbationRule::validate() const {
    if (id.empty()) throw ValidationError("rule without id");
    if (ceiling < 1 || ceiling > kMaxScore)
        throw ValidationError("rule " + id + ": ceiling " + std::to_string(ceiling) +
                              " outside 1..5");
    if (instruction.empty()) throw ValidationError("rule " + id + ": empty instruction");
}

RuleSet::RuleSet(std::vector<PerturbationRule> rules) {
    for (auto& r : rules) {
        r.validate();
        auto& bucket = buckets_[r.ceiling];
        if (!by_id_.emplace(r.id, std::pair{r.ceiling, bucket.size()}).second)
            throw ValidationError("duplicate rule id " + r.id);
        bucket.push_back(std::move(r));
    }
}

std::span<const PerturbationRule> RuleSet::bucket(Score ceiling) const {
    if (ceiling < 1 || ceiling > kMaxScore) return {};
    return buckets_[ceiling];
}

const PerturbationRule* RuleSet::find(std::string_view id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return nullptr;
    return &buckets_[it->second.first][it->second.second];
}

void RuleSet::require_buckets(std::span<const Score> ceilings) const {
    for (Score c : ceilings)
        if (bucket(c).empty())
            throw ConfigError("rule set has no rules with ceiling " + std::to_string(c));
}

void PipelineConfig::validate() const {
    if (programs_per_score < 1) throw ConfigError("M must be >= 1");
    if (candidates_per_group < 1) throw ConfigError("m must be >= 1");
    if (max_steps_exemplar < 1 || max_steps_deteriorate < 1)
        throw ConfigError("max step counts must be >= 1");
    if (!(softmax_temperature > 0)) throw ConfigError("tau must be positive");
    if (sampling_temperature < 0) throw ConfigError("sampling temperature must be >= 0");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
    if (attempts_per_quota < 1) throw ConfigError("attempts_per_quota must be >= 1");
}

void to_json(Json& j, const TestCase& t) {
    j = Json{{"id", t.id}, {"mode", t.mode}, {"timeout", t.timeout}};
    if (t.mode == TestMode::stdin_stdout) {
        j["input"] = t.input;
        j["expected_output"] = t.expected_output;
    } else {
        j["command"] = t.command;
    }
}

void from_json(const Json& j, TestCase& t) {
    j.at("id").get_to(t.id);
    t.mode = TestMode::stdin_stdout;
    get_optional(j, "mode", t.mode);
    get_optional(j, "input", t.input);
    get_optional(j, "expected_output", t.expected_output);
    get_optional(j, "command", t.command);
    get_optional(j, "timeout", t.timeout);
}

void to_json(Json& j, const Requirement& r) {
    j = Json{{"id", r.id},
             {"source", r.source},
             {"language", r.language},
             {"statement", r.statement},
             {"tests", r.tests},
             {"reference_program_ids", r.reference_program_ids}};
}

void from_json(const Json& j, Requirement& r) {
    j.at("id").get_to(r.id);
    get_optional(j, "source", r.source);
    j.at("language").get_to(r.language);
    j.at("statement").get_to(r.statement);
    j.at("tests").get_to(r.tests);
    get_optional(j, "reference_program_ids", r.reference_program_ids);
}

void to_json(Json& j, const Program& p) {
    j = Json{{"id", p.id},
             {"requirement_id", p.requirement_id},
             {"origin", p.origin},
             {"parent_id", p.parent_id ? Json(*p.parent_id) : Json(nullptr)},
             {"rule_ids", p.rule_ids},
             {"target_score", p.target_score},
             {"functional_status", p.functional_status},
             {"final_score", p.final_score ? Json(*p.final_score) : Json(nullptr)},
             {"code", p.code}};
}

void from_json(const Json& j, Program& p) {
    j.at("id").get_to(p.id);
    j.at("requirement_id").get_to(p.requirement_id);
    j.at("code").get_to(p.code);
    j.at("origin").get_to(p.origin);
    p.parent_id.reset();
    if (auto it = j.find("parent_id"); it != j.end() && !it->is_null())
        p.parent_id = it->get<std::string>();
    get_optional(j, "rule_ids", p.rule_ids);
    j.at("target_score").get_to(p.target_score);
    get_optional(j, "functional_status", p.functional_status);
    p.final_score.reset();
    if (auto it = j.find("final_score"); it != j.end() && !it->is_null())
        p.final_score = it->get<Score>();
}

void to_json(Json& j, const PerturbationRule& r) {
    j = Json{{"id", r.id}, {"ceiling", r.ceiling}, {"category", r.category},
             {"instruction", r.instruction}};
}

void from_json(const Json& j, PerturbationRule& r) {
    j.at("id").get_to(r.id);
    j.at("ceiling").get_to(r.ceiling);
    get_optional(j, "category", r.category);
    j.at("instruction").get_to(r.instruction);
}

}  // namespace forge
