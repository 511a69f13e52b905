#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "forge/domain.hpp"

namespace forge {

// Mid-rank (average over ties) Pearson correlation.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Tau-b with tie corrections, O(n log n).
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

// raters x items; nullopt marks a missing rating.
using RatingsTable = std::vector<std::vector<std::optional<double>>>;

enum class AlphaLevel { nominal, ordinal, interval };

struct Agreement {
    double value = 0.0;
    // Set when the statistic has a zero denominator and perfect agreement
    // is reported by convention.
    bool degenerate = false;
};

Agreement krippendorff_alpha(const RatingsTable& ratings, AlphaLevel level = AlphaLevel::ordinal);

enum class IccForm { icc_2_1, icc_3_1 };

// Two-way ANOVA ICC over a complete table (raters x items).
Agreement icc(const RatingsTable& ratings, IccForm form);

struct BinaryConfusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const noexcept { return tp + fp + tn + fn; }
};

struct ClassificationStats {
    double mcc = 0.0, f1 = 0.0, precision = 0.0, recall = 0.0;
    bool mcc_undefined = false;
    bool precision_undefined = false;
    bool recall_undefined = false;
};

ClassificationStats classification_stats(const BinaryConfusion& conf);

enum class Subtask { functionality, quality, effort };

// (ground-truth positive, predicted positive), or nullopt when the sample
// does not belong to the subtask.
std::optional<std::pair<bool, bool>> extract_subtask(Score gt, Score pred, Subtask task);

BinaryConfusion confusion_for(const std::vector<Score>& gt, const std::vector<Score>& pred, Subtask task);

struct ConsistencyStats {
    Agreement alpha;
    Agreement icc_3_1;
    double eq_pct = 0.0;
};

// Runs as raters; every cell must be present.
ConsistencyStats consistency_stats(const RatingsTable& runs);

struct GroupSummary {
    std::string group;
    std::size_t n = 0;
    double mean = 0.0, stddev = 0.0;  // of predictions; sample std
    std::optional<double> rho, tau, alpha;  // x100; nullopt when undefined
};

struct PairedSample {
    std::string sample_id;
    std::string group;
    Score ground_truth = 0;
    Score predicted = 0;
};

// One row per group plus an "all" row.
std::vector<GroupSummary> summarize(const std::vector<PairedSample>& samples);

std::string format_summary_table(const std::string& metric, const std::vector<GroupSummary>& rows, bool header = true);

void to_json(Json& j, const GroupSummary& g);
void to_json(Json& j, const Agreement& a);
void to_json(Json& j, const ClassificationStats& c);

}  // namespace forge
