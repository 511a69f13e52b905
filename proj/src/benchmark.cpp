#include "forge/benchmark.hpp"

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/lexer.hpp"

namespace forge {

Language program_language(const Program& program, const std::map<std::string, Program>& programs,
                          const std::map<std::string, Requirement>& requirements) {
    const Program* p = &program;
    std::set<std::string> seen;
    while (p->origin == Origin::disrupted && p->parent_id) {
        if (!seen.insert(p->id).second) break;
        auto it = programs.find(*p->parent_id);
        if (it == programs.end()) break;
        p = &it->second;
    }
    auto req = requirements.find(p->requirement_id);
    if (req == requirements.end()) throw ValidationError("unknown requirement " + p->requirement_id);
    return req->second.language;
}

std::map<std::string, Score> ground_truth_scores(const std::vector<Program>& programs,
                                                 const std::vector<AnnotationRecord>& annotations,
                                                 bool fallback_to_target) {
    std::map<std::string, Score> earliest;
    for (const auto& a : annotations) earliest.emplace(a.program_id, a.final_score);
    std::map<std::string, Score> out;
    for (const auto& p : programs) {
        if (p.origin == Origin::disrupted) out[p.id] = 0;
        else if (p.final_score) out[p.id] = *p.final_score;
        else if (auto it = earliest.find(p.id); it != earliest.end()) out[p.id] = it->second;
        else if (fallback_to_target) out[p.id] = p.target_score;
    }
    return out;
}

namespace {

std::size_t lines_of_code(const std::string& code) {
    std::size_t n = 0;
    std::size_t start = 0;
    while (start < code.size()) {
        auto end = code.find('\n', start);
        if (end == std::string::npos) end = code.size();
        if (code.find_first_not_of(" \t\r", start) < end) ++n;
        start = end + 1;
    }
    return n;
}

VersionStats tally(std::string version, const std::vector<const Program*>& members,
                   const std::function<std::optional<Score>(const Program&)>& score_of,
                   const std::map<std::string, Program>& by_id, const std::map<std::string, Requirement>& reqs) {
    VersionStats v;
    v.version = std::move(version);
    std::set<std::string> req_ids;
    double loc = 0, tokens = 0;
    for (const Program* p : members) {
        if (auto s = score_of(*p)) ++v.per_score[static_cast<std::size_t>(*s)];
        else ++v.unscored;
        req_ids.insert(p->requirement_id);
        loc += static_cast<double>(lines_of_code(p->code));
        tokens += static_cast<double>(lex(p->code, program_language(*p, by_id, reqs)).size());
    }
    v.total = members.size();
    v.requirements = req_ids.size();
    if (v.total) {
        v.avg_loc = loc / static_cast<double>(v.total);
        v.avg_tokens = tokens / static_cast<double>(v.total);
    }
    return v;
}

}  // namespace

BenchmarkStats compute_benchmark_stats(const std::vector<Program>& programs, const std::vector<Requirement>& requirements,
                                       const std::set<std::string>& selected,
                                       const std::map<std::string, Score>& final_scores) {
    std::map<std::string, Program> by_id;
    for (const auto& p : programs) by_id.emplace(p.id, p);
    std::map<std::string, Requirement> reqs;
    for (const auto& r : requirements) reqs.emplace(r.id, r);
    std::vector<const Program*> all, chosen;
    for (const auto& p : programs) {
        all.push_back(&p);
        if (selected.count(p.id)) chosen.push_back(&p);
    }
    BenchmarkStats b;
    b.unverified = tally("Unv.", all, [](const Program& p) { return std::optional<Score>(p.target_score); }, by_id, reqs);
    b.verified = tally(
        "V.", chosen,
        [&](const Program& p) -> std::optional<Score> {
            auto it = final_scores.find(p.id);
            if (it == final_scores.end()) return std::nullopt;
            return it->second;
        },
        by_id, reqs);
    return b;
}

std::string format_benchmark_table(const BenchmarkStats& stats) {
    std::string out = fmt::format("{:<8}{:>7}{:>7}{:>7}{:>7}{:>7}{:>7}{:>10}{:>7}{:>10}{:>8}{:>8}\n", "Version", "0", "1",
                                  "2", "3", "4", "5", "unscored", "LoC", "#Tokens", "#Req.", "Total");
    for (const VersionStats* v : {&stats.unverified, &stats.verified}) {
        out += fmt::format("{:<8}", v->version);
        for (auto c : v->per_score) out += fmt::format("{:>7}", c);
        out += fmt::format("{:>10}{:>7.1f}{:>10.0f}{:>8}{:>8}\n", v->unscored, v->avg_loc, v->avg_tokens, v->requirements,
                           v->total);
    }
    return out;
}

std::vector<MetricReport> build_meta_report(const std::vector<Judgment>& judgments,
                                            const std::map<std::string, Score>& ground_truth,
                                            const std::map<std::string, std::string>& group_of) {
    // (metric, model) -> program -> run -> score
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::map<int, Score>>> table;
    for (const auto& j : judgments) {
        if (!ground_truth.count(j.program_id)) continue;
        table[{std::string(to_string(j.metric)), j.model}][j.program_id].emplace(j.run, j.score);
    }
    std::vector<MetricReport> out;
    for (const auto& [key, per_program] : table) {
        MetricReport r;
        r.metric = key.first;
        r.model = key.second;
        std::vector<PairedSample> paired;
        std::vector<Score> gt, pred;
        std::set<int> runs;
        for (const auto& [pid, by_run] : per_program) {
            for (const auto& [run, _] : by_run) runs.insert(run);
            auto first = by_run.find(1);
            if (first == by_run.end()) continue;
            auto g = group_of.find(pid);
            paired.push_back({pid, g == group_of.end() ? std::string("unknown") : g->second, ground_truth.at(pid),
                              first->second});
            gt.push_back(ground_truth.at(pid));
            pred.push_back(first->second);
        }
        r.samples = paired.size();
        r.correlation = summarize(paired);
        for (Subtask task : {Subtask::functionality, Subtask::quality, Subtask::effort}) {
            SubtaskResult s{task, confusion_for(gt, pred, task), std::nullopt};
            if (s.confusion.total() > 0) s.stats = classification_stats(s.confusion);
            r.subtasks.push_back(s);
        }
        if (runs.size() >= 2) {
            RatingsTable t(runs.size());
            for (const auto& [pid, by_run] : per_program) {
                if (by_run.size() != runs.size()) continue;
                std::size_t k = 0;
                for (int run : runs) t[k++].emplace_back(by_run.at(run));
                ++r.consistency_items;
            }
            if (r.consistency_items >= 2) r.consistency = consistency_stats(t);
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::string_view subtask_name(Subtask t) {
    switch (t) {
        case Subtask::functionality: return "functionality";
        case Subtask::quality: return "quality";
        case Subtask::effort: return "effort";
    }
    return "?";
}

}  // namespace

std::string format_meta_tables(const std::vector<MetricReport>& reports) {
    std::string out = "# correlation with ground truth (x100)\n";
    bool first = true;
    for (const auto& r : reports) {
        out += format_summary_table(r.model.empty() ? r.metric : r.metric + "@" + r.model, r.correlation, first);
        first = false;
    }
    out += "\n# binary subtasks (x100)\n";
    out += fmt::format("{:<24} {:<14} {:>6} {:>7} {:>7} {:>7} {:>7}\n", "metric", "subtask", "n", "MCC", "F1", "P", "R");
    for (const auto& r : reports)
        for (const auto& s : r.subtasks) {
            std::string name = r.model.empty() ? r.metric : r.metric + "@" + r.model;
            if (!s.stats) {
                out += fmt::format("{:<24} {:<14} {:>6} {:>7} {:>7} {:>7} {:>7}\n", name, subtask_name(s.task), 0, "n/a",
                                   "n/a", "n/a", "n/a");
                continue;
            }
            out += fmt::format("{:<24} {:<14} {:>6} {:>7} {:>7.1f} {:>7.1f} {:>7.1f}\n", name, subtask_name(s.task),
                               s.confusion.total(),
                               s.stats->mcc_undefined ? std::string("n/a") : fmt::format("{:.1f}", 100 * s.stats->mcc),
                               100 * s.stats->f1, 100 * s.stats->precision, 100 * s.stats->recall);
        }
    out += "\n# run consistency (x100)\n";
    out += fmt::format("{:<24} {:>6} {:>7} {:>7} {:>7}\n", "metric", "n", "alpha", "ICC", "Eq%");
    for (const auto& r : reports) {
        if (!r.consistency) continue;
        out += fmt::format("{:<24} {:>6} {:>7.1f} {:>7.1f} {:>7.1f}\n", r.model.empty() ? r.metric : r.metric + "@" + r.model,
                           r.consistency_items, 100 * r.consistency->alpha.value, 100 * r.consistency->icc_3_1.value,
                           r.consistency->eq_pct);
    }
    return out;
}

void to_json(Json& j, const VersionStats& v) {
    j = Json{{"version", v.version},   {"per_score", v.per_score},       {"unscored", v.unscored},
             {"avg_loc", v.avg_loc},   {"avg_tokens", v.avg_tokens},     {"requirements", v.requirements},
             {"total", v.total}};
}

void to_json(Json& j, const BenchmarkStats& b) { j = Json{{"unverified", b.unverified}, {"verified", b.verified}}; }

void to_json(Json& j, const MetricReport& r) {
    Json subtasks = Json::array();
    for (const auto& s : r.subtasks) {
        Json js{{"subtask", subtask_name(s.task)},
                {"tp", s.confusion.tp},
                {"fp", s.confusion.fp},
                {"tn", s.confusion.tn},
                {"fn", s.confusion.fn}};
        js["stats"] = s.stats ? Json(*s.stats) : Json(nullptr);
        subtasks.push_back(js);
    }
    j = Json{{"metric", r.metric}, {"model", r.model}, {"samples", r.samples}, {"correlation", r.correlation},
             {"subtasks", subtasks}};
    if (r.consistency)
        j["consistency"] = Json{{"alpha", r.consistency->alpha},
                                {"icc_3_1", r.consistency->icc_3_1},
                                {"eq_pct", r.consistency->eq_pct},
                                {"items", r.consistency_items}};
    else
        j["consistency"] = nullptr;
}

}  // namespace forge
