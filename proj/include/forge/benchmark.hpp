#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forge/calibration.hpp"
#include "forge/judges.hpp"
#include "forge/stats.hpp"

namespace forge {

// Language a program's code is written in: its requirement's language, or
// for disrupted clones the language of the program they were copied from.
Language program_language(const Program& program, const std::map<std::string, Program>& programs,
                          const std::map<std::string, Requirement>& requirements);

// Ground-truth scores: disrupted programs keep 0, a stored final score wins,
// otherwise the earliest annotation; with `fallback_to_target` unannotated
// programs use their target score.
std::map<std::string, Score> ground_truth_scores(const std::vector<Program>& programs,
                                                 const std::vector<AnnotationRecord>& annotations,
                                                 bool fallback_to_target);

struct VersionStats {
    std::string version;
    std::array<std::size_t, 6> per_score{};
    std::size_t unscored = 0;
    double avg_loc = 0.0;
    double avg_tokens = 0.0;
    std::size_t requirements = 0;
    std::size_t total = 0;
};

struct BenchmarkStats {
    VersionStats unverified;  // every generated program, by target score
    VersionStats verified;    // selected programs, by ground-truth score
};

BenchmarkStats compute_benchmark_stats(const std::vector<Program>& programs,
                                       const std::vector<Requirement>& requirements,
                                       const std::set<std::string>& selected,
                                       const std::map<std::string, Score>& final_scores);

std::string format_benchmark_table(const BenchmarkStats& stats);

struct SubtaskResult {
    Subtask task;
    BinaryConfusion confusion;
    std::optional<ClassificationStats> stats;  // nullopt when no sample applies
};

struct MetricReport {
    std::string metric;
    std::string model;
    std::vector<GroupSummary> correlation;  // run 1, per language + all
    std::vector<SubtaskResult> subtasks;
    std::optional<ConsistencyStats> consistency;  // when >= 2 runs
    std::size_t consistency_items = 0;
    std::size_t samples = 0;
};

// One report per (metric, model) over programs that have ground truth.
std::vector<MetricReport> build_meta_report(const std::vector<Judgment>& judgments,
                                            const std::map<std::string, Score>& ground_truth,
                                            const std::map<std::string, std::string>& group_of);

std::string format_meta_tables(const std::vector<MetricReport>& reports);

void to_json(Json& j, const VersionStats& v);
void to_json(Json& j, const BenchmarkStats& b);
void to_json(Json& j, const MetricReport& r);

}  // namespace forge
