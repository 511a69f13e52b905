#include "forge/calibration.hpp"

#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/diff.hpp"
#include "forge/error.hpp"
#include "forge/jsonl.hpp"
#include "forge/subprocess.hpp"

namespace forge {

namespace fs = std::filesystem;

std::optional<std::string> nearest_five_point_ancestor(const Program& program,
                                                       const std::map<std::string, Program>& programs) {
    std::set<std::string> seen{program.id};
    std::optional<std::string> cursor = program.parent_id;
    while (cursor) {
        if (!seen.insert(*cursor).second) throw ValidationError("lineage cycle at " + *cursor);
        auto it = programs.find(*cursor);
        if (it == programs.end()) throw ValidationError("unresolved parent " + *cursor + " of " + program.id);
        if (it->second.target_score == kMaxScore && it->second.origin != Origin::disrupted) return it->first;
        cursor = it->second.parent_id;
    }
    return std::nullopt;
}

namespace {

std::string first_word(const std::string& command) {
    std::istringstream in(command);
    std::string word;
    in >> word;
    return word;
}

void run_analyzer(DiagnosisReport& report, const Program& program, const Requirement& requirement,
                  const AnalyzerConfig& analyzers, const fs::path& scratch) {
    auto it = analyzers.commands.find(requirement.language);
    if (it == analyzers.commands.end() || it->second.empty()) {
        report.static_analysis_available = false;
        report.static_analysis = "unavailable: no analyzer configured for " + std::string(to_string(requirement.language));
        return;
    }
    const std::string tool = first_word(it->second);
    if (!find_executable(tool)) {
        report.static_analysis_available = false;
        report.static_analysis = "unavailable: " + tool + " not found";
        return;
    }
    const char* ext = requirement.language == Language::python ? ".py"
                      : requirement.language == Language::cpp  ? ".cpp"
                                                               : ".java";
    fs::path dir = scratch / ("analyze-" + program.id);
    fs::create_directories(dir);
    fs::path file = dir / (requirement.language == Language::java ? std::string("Main") + ext : std::string("main") + ext);
    write_file(file, program.code);
    std::string command = it->second;
    for (std::size_t pos; (pos = command.find("{file}")) != std::string::npos;) command.replace(pos, 6, file.string());
    ProcessLimits limits;
    limits.wall_seconds = analyzers.timeout_seconds;
    auto result = run_process(command, dir, {}, "", limits);
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (result.spawn_failed || result.timed_out) {
        report.static_analysis_available = false;
        report.static_analysis = result.timed_out ? "unavailable: analyzer timed out" : "unavailable: " + tool + " failed to start";
        return;
    }
    std::string text = result.out;
    const std::string marker = dir.string();
    for (std::size_t pos; (pos = text.find(marker)) != std::string::npos;) text.replace(pos, marker.size(), "<workspace>");
    report.static_analysis = text;
}

}  // namespace

DiagnosisReport assemble_report(const Program& program, const Requirement& requirement,
                                const std::map<std::string, Program>& programs, const RuleSet& rules,
                                const TestReport& execution, const AnalyzerConfig& analyzers,
                                const QualityReporter& reporter, const fs::path& scratch) {
    DiagnosisReport report;
    report.program_id = program.id;
    report.target_score = program.target_score;
    report.execution_report = execution;

    report.anchor_id = nearest_five_point_ancestor(program, programs);
    if (!report.anchor_id) {
        report.diff_note = "is root";
    } else {
        const Program& anchor = programs.at(*report.anchor_id);
        report.unified_diff = unified_diff(anchor.code, program.code, anchor.id, program.id);
        if (report.unified_diff.empty()) report.diff_note = "identical to " + anchor.id;
    }
    if (program.origin == Origin::perturbed && report.unified_diff.empty() && report.anchor_id)
        spdlog::warn("{}: perturbed program has no textual change against {}", program.id, *report.anchor_id);

    for (const auto& id : program.rule_ids) {
        const PerturbationRule* rule = rules.find(id);
        report.rule_sequence.push_back({id, rule ? rule->instruction : std::string("(rule not in pack)")});
    }

    run_analyzer(report, program, requirement, analyzers, scratch);

    if (!reporter.gateway || !reporter.prompts || reporter.model.empty()) {
        report.llm_quality_available = false;
        report.llm_quality_report = "unavailable: no quality-report model configured";
    } else {
        try {
            ChatRequest req;
            req.model = reporter.model;
            const std::map<std::string, std::string> values{
                {"language", std::string(to_string(requirement.language))},
                {"statement", requirement.statement},
                {"code", program.code}};
            req.system = reporter.prompts->render("quality_system", values);
            req.user_turns.push_back(reporter.prompts->render("quality_user", values));
            auto resp = reporter.gateway->chat(req);
            if (resp.finish_reason != FinishReason::complete) throw ExternalError("quality report incomplete");
            report.llm_quality_report = resp.text;
        } catch (const Error& e) {
            report.llm_quality_available = false;
            report.llm_quality_report = std::string("unavailable: ") + e.what();
        }
    }
    return report;
}

std::map<std::string, std::string> AnnotationAnswer::problems(FunctionalStatus status) const {
    std::map<std::string, std::string> out;
    if (status != FunctionalStatus::pass && status != FunctionalStatus::fail) {
        out["functional_status"] = fmt::format("cannot calibrate a program with status {}", to_string(status));
        return out;
    }
    if (rewrite) {
        if (status == FunctionalStatus::pass) out["rewrite"] = "a passing program cannot be marked for rewrite";
        return out;
    }
    if (quality_perfect) {
        if (status == FunctionalStatus::fail) out["quality_perfect"] = "only passing programs can be quality-perfect";
        if (scope) out["scope"] = "scope must be absent when quality_perfect is set";
        return out;
    }
    if (!scope) out["scope"] = "scope (tweak or refactor) is required";
    return out;
}

Score derive_final_score(FunctionalStatus status, const AnnotationAnswer& answer) {
    auto problems = answer.problems(status);
    if (!problems.empty()) {
        std::string msg = "invalid annotation:";
        for (const auto& [field, why] : problems) msg += " " + field + ": " + why + ";";
        throw ValidationError(msg);
    }
    if (answer.rewrite) return 0;
    const bool pass = status == FunctionalStatus::pass;
    if (answer.quality_perfect) return 5;
    const bool tweak = *answer.scope == ChangeScope::tweak;
    if (pass) return tweak ? 4 : 3;
    return tweak ? 2 : 1;
}

void AnnotationRecord::validate() const {
    if (program_id.empty()) throw ValidationError("annotation without program id");
    if (annotator_id.empty()) throw ValidationError("annotation without annotator id");
    check_score(final_score, "final score");
    Score expected = derive_final_score(functional_status, answer);
    if (expected != final_score)
        throw ValidationError(fmt::format("annotation of {} by {} stores score {} but derives {}", program_id,
                                          annotator_id, final_score, expected));
}

InterraterSummary interrater_summary(const std::vector<AnnotationRecord>& records, AlphaLevel level) {
    std::map<std::string, std::map<std::string, Score>> by_annotator;  // annotator -> program -> score
    std::map<std::string, std::set<std::string>> raters_of;
    for (const auto& r : records) {
        // earliest record per (program, annotator) wins
        if (by_annotator[r.annotator_id].emplace(r.program_id, r.final_score).second)
            raters_of[r.program_id].insert(r.annotator_id);
    }
    if (by_annotator.size() < 2) throw ValidationError("inter-rater summary needs at least 2 annotators");
    std::vector<std::string> annotators;
    for (const auto& [a, _] : by_annotator) annotators.push_back(a);
    std::vector<std::string> shared, complete;
    for (const auto& [p, raters] : raters_of) {
        if (raters.size() >= 2) shared.push_back(p);
        if (raters.size() == annotators.size()) complete.push_back(p);
    }
    if (shared.empty()) throw ValidationError("annotators share no programs");

    InterraterSummary s;
    s.shared_items = shared.size();
    RatingsTable table(annotators.size());
    std::size_t agree = 0;
    for (const auto& p : shared) {
        std::set<Score> distinct;
        for (std::size_t a = 0; a < annotators.size(); ++a) {
            auto& row = by_annotator[annotators[a]];
            auto it = row.find(p);
            if (it == row.end()) {
                table[a].emplace_back(std::nullopt);
            } else {
                table[a].emplace_back(it->second);
                distinct.insert(it->second);
            }
        }
        agree += distinct.size() == 1 ? 1 : 0;
    }
    s.alpha = krippendorff_alpha(table, level);
    s.exact_match_pct = 100.0 * static_cast<double>(agree) / static_cast<double>(shared.size());
    if (complete.size() >= 2) {
        RatingsTable full(annotators.size());
        for (const auto& p : complete)
            for (std::size_t a = 0; a < annotators.size(); ++a) full[a].emplace_back(by_annotator[annotators[a]][p]);
        s.icc_2_1 = icc(full, IccForm::icc_2_1);
    } else {
        throw ValidationError("ICC needs at least 2 programs rated by every annotator");
    }
    return s;
}

void to_json(Json& j, const RuleStep& r) { j = Json{{"rule_id", r.rule_id}, {"instruction", r.instruction}}; }
void from_json(const Json& j, RuleStep& r) {
    j.at("rule_id").get_to(r.rule_id);
    j.at("instruction").get_to(r.instruction);
}

void to_json(Json& j, const DiagnosisReport& r) {
    j = Json{{"program_id", r.program_id},
             {"unified_diff", r.unified_diff},
             {"diff_note", r.diff_note},
             {"anchor_id", r.anchor_id ? Json(*r.anchor_id) : Json(nullptr)},
             {"target_score", r.target_score},
             {"rule_sequence", r.rule_sequence},
             {"static_analysis", r.static_analysis},
             {"static_analysis_available", r.static_analysis_available},
             {"execution_report", r.execution_report},
             {"llm_quality_report", r.llm_quality_report},
             {"llm_quality_available", r.llm_quality_available}};
}

void from_json(const Json& j, DiagnosisReport& r) {
    j.at("program_id").get_to(r.program_id);
    j.at("unified_diff").get_to(r.unified_diff);
    j.at("diff_note").get_to(r.diff_note);
    r.anchor_id.reset();
    if (!j.at("anchor_id").is_null()) r.anchor_id = j.at("anchor_id").get<std::string>();
    j.at("target_score").get_to(r.target_score);
    j.at("rule_sequence").get_to(r.rule_sequence);
    j.at("static_analysis").get_to(r.static_analysis);
    j.at("static_analysis_available").get_to(r.static_analysis_available);
    j.at("execution_report").get_to(r.execution_report);
    j.at("llm_quality_report").get_to(r.llm_quality_report);
    j.at("llm_quality_available").get_to(r.llm_quality_available);
}

void to_json(Json& j, const AnnotationAnswer& a) {
    j = Json{{"quality_perfect", a.quality_perfect},
             {"scope", a.scope ? Json(*a.scope == ChangeScope::tweak ? "tweak" : "refactor") : Json(nullptr)},
             {"rewrite", a.rewrite},
             {"note", a.note ? Json(*a.note) : Json(nullptr)}};
}

void from_json(const Json& j, AnnotationAnswer& a) {
    if (!j.is_object()) throw ValidationError("answer must be an object");
    a = AnnotationAnswer{};
    auto boolean = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return false;
        if (!it->is_boolean()) throw ValidationError(std::string(key) + " must be a boolean");
        return it->get<bool>();
    };
    a.quality_perfect = boolean("quality_perfect");
    a.rewrite = boolean("rewrite");
    if (auto it = j.find("scope"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ValidationError("scope must be \"tweak\" or \"refactor\"");
        auto s = it->get<std::string>();
        if (s == "tweak") a.scope = ChangeScope::tweak;
        else if (s == "refactor") a.scope = ChangeScope::refactor;
        else throw ValidationError("scope must be \"tweak\" or \"refactor\", got \"" + s + "\"");
    }
    if (auto it = j.find("note"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ValidationError("note must be a string");
        a.note = it->get<std::string>();
    }
}

void to_json(Json& j, const AnnotationRecord& r) {
    j = Json{{"program_id", r.program_id},
             {"annotator_id", r.annotator_id},
             {"answer", r.answer},
             {"functional_status", r.functional_status},
             {"final_score", r.final_score},
             {"timestamp", r.timestamp}};
}

void from_json(const Json& j, AnnotationRecord& r) {
    j.at("program_id").get_to(r.program_id);
    j.at("annotator_id").get_to(r.annotator_id);
    j.at("answer").get_to(r.answer);
    j.at("functional_status").get_to(r.functional_status);
    j.at("final_score").get_to(r.final_score);
    j.at("timestamp").get_to(r.timestamp);
    r.validate();
}

}  // namespace forge
