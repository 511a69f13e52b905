#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/domain.hpp"
#include "forge/llm.hpp"
#include "forge/prompts.hpp"
#include "forge/sandbox.hpp"
#include "forge/stats.hpp"

namespace forge {

struct RuleStep {
    std::string rule_id;
    std::string instruction;
};

struct DiagnosisReport {
    std::string program_id;
    std::string unified_diff;
    std::string diff_note;  // reason when the diff is empty ("is root")
    std::optional<std::string> anchor_id;  // nearest 5-point ancestor
    Score target_score = 5;
    std::vector<RuleStep> rule_sequence;
    std::string static_analysis;
    bool static_analysis_available = true;
    TestReport execution_report;
    std::string llm_quality_report;
    bool llm_quality_available = true;
};

// Static analyzer command per language; {file} is the program's source path.
struct AnalyzerConfig {
    std::map<Language, std::string> commands;
    double timeout_seconds = 60.0;
};

struct QualityReporter {
    Gateway* gateway = nullptr;
    const PromptLibrary* prompts = nullptr;
    std::string model;
};

// Nearest strict ancestor with target score 5, following parent ids.
std::optional<std::string> nearest_five_point_ancestor(const Program& program,
                                                       const std::map<std::string, Program>& programs);

DiagnosisReport assemble_report(const Program& program, const Requirement& requirement,
                                const std::map<std::string, Program>& programs, const RuleSet& rules,
                                const TestReport& execution, const AnalyzerConfig& analyzers,
                                const QualityReporter& reporter, const std::filesystem::path& scratch);

enum class ChangeScope { tweak, refactor };

struct AnnotationAnswer {
    bool quality_perfect = false;
    std::optional<ChangeScope> scope;
    bool rewrite = false;
    std::optional<std::string> note;

    // Field-level problems for the given functional status (empty when valid).
    std::map<std::string, std::string> problems(FunctionalStatus status) const;
};

// rewrite => 0; fail: tweak 2, refactor 1; pass: perfect 5, tweak 4,
// refactor 3. A passing program can never be marked for rewrite.
Score derive_final_score(FunctionalStatus status, const AnnotationAnswer& answer);

struct AnnotationRecord {
    std::string program_id;
    std::string annotator_id;
    AnnotationAnswer answer;
    FunctionalStatus functional_status = FunctionalStatus::pass;
    Score final_score = 5;
    std::string timestamp;  // ISO-8601 UTC

    // Re-derives the score; throws ValidationError on mismatch.
    void validate() const;
};

struct InterraterSummary {
    Agreement alpha;
    Agreement icc_2_1;
    double exact_match_pct = 0.0;
    std::size_t shared_items = 0;
};

InterraterSummary interrater_summary(const std::vector<AnnotationRecord>& records,
                                     AlphaLevel level = AlphaLevel::ordinal);

void to_json(Json& j, const RuleStep& r);
void from_json(const Json& j, RuleStep& r);
void to_json(Json& j, const DiagnosisReport& r);
void from_json(const Json& j, DiagnosisReport& r);
void to_json(Json& j, const AnnotationAnswer& a);
void from_json(const Json& j, AnnotationAnswer& a);
void to_json(Json& j, const AnnotationRecord& r);
void from_json(const Json& j, AnnotationRecord& r);

}  // namespace forge
