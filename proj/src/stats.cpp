#include "forge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "forge/error.hpp"

namespace forge {

namespace {

void check_paired(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("paired score lists differ in length");
    if (x.size() < 2) throw UndefinedResultError("correlation needs at least 2 pairs");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (constant(x) || constant(y)) throw UndefinedResultError("correlation undefined for a constant vector");
}

std::vector<double> mid_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

long long tied_pairs(const std::vector<double>& sorted) {
    long long total = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        long long t = static_cast<long long>(j - i);
        total += t * (t - 1) / 2;
        i = j;
    }
    return total;
}

// Sorts v and returns the number of inversions.
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    std::size_t mid = (lo + hi) / 2;
    long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<long long>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    check_paired(x, y);
    return pearson(mid_ranks(x), mid_ranks(y));
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    check_paired(x, y);
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]); });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    const long long n1 = tied_pairs(xs);
    long long n3 = 0;  // tied in both
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
        long long t = static_cast<long long>(j - i);
        n3 += t * (t - 1) / 2;
        i = j;
    }
    std::vector<double> buf(n);
    const long long swaps = merge_count(ys, buf, 0, n);
    const long long n2 = tied_pairs(ys);
    const double numerator = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
    return numerator / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

Agreement krippendorff_alpha(const RatingsTable& ratings, AlphaLevel level) {
    if (ratings.size() < 2) throw ValidationError("agreement needs at least 2 raters");
    const std::size_t items = ratings.front().size();
    for (const auto& row : ratings)
        if (row.size() != items) throw ValidationError("ratings table rows differ in length");

    std::vector<double> values;
    for (const auto& row : ratings)
        for (const auto& v : row)
            if (v) values.push_back(*v);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const std::size_t V = values.size();
    auto index_of = [&](double v) {
        return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
    };

    std::vector<double> o(V * V, 0.0);
    for (std::size_t u = 0; u < items; ++u) {
        std::vector<std::size_t> present;
        for (const auto& row : ratings)
            if (row[u]) present.push_back(index_of(*row[u]));
        const std::size_t m = present.size();
        if (m < 2) continue;
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                if (a != b) o[present[a] * V + present[b]] += 1.0 / static_cast<double>(m - 1);
    }
    std::vector<double> nc(V, 0.0);
    double n = 0.0;
    for (std::size_t c = 0; c < V; ++c)
        for (std::size_t k = 0; k < V; ++k) nc[c] += o[c * V + k];
    for (double v : nc) n += v;
    if (n < 2.0) throw UndefinedResultError("no pairable ratings");

    auto delta2 = [&](std::size_t c, std::size_t k) -> double {
        if (c == k) return 0.0;
        switch (level) {
            case AlphaLevel::nominal:
                return 1.0;
            case AlphaLevel::interval:
                return (values[c] - values[k]) * (values[c] - values[k]);
            case AlphaLevel::ordinal: {
                std::size_t lo = std::min(c, k), hi = std::max(c, k);
                double s = 0.0;
                for (std::size_t g = lo; g <= hi; ++g) s += nc[g];
                s -= (nc[lo] + nc[hi]) / 2.0;
                return s * s;
            }
        }
        return 0.0;
    };
    double d_o = 0.0, d_e = 0.0;
    for (std::size_t c = 0; c < V; ++c)
        for (std::size_t k = 0; k < V; ++k) {
            double d = delta2(c, k);
            d_o += o[c * V + k] * d;
            d_e += nc[c] * nc[k] * d;
        }
    d_o /= n;
    d_e /= n * (n - 1.0);
    if (d_e == 0.0) return {1.0, true};
    return {1.0 - d_o / d_e, false};
}

Agreement icc(const RatingsTable& ratings, IccForm form) {
    const std::size_t k = ratings.size();
    if (k < 2) throw ValidationError("ICC needs at least 2 raters");
    const std::size_t n = ratings.front().size();
    if (n < 2) throw ValidationError("ICC needs at least 2 items");
    for (const auto& row : ratings) {
        if (row.size() != n) throw ValidationError("ratings table rows differ in length");
        for (const auto& v : row)
            if (!v) throw ValidationError("ICC requires a complete ratings table");
    }
    double grand = 0.0;
    std::vector<double> item_mean(n, 0.0), rater_mean(k, 0.0);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t i = 0; i < n; ++i) {
            double v = *ratings[r][i];
            grand += v;
            item_mean[i] += v;
            rater_mean[r] += v;
        }
    const double kn = static_cast<double>(k * n);
    grand /= kn;
    for (auto& m : item_mean) m /= static_cast<double>(k);
    for (auto& m : rater_mean) m /= static_cast<double>(n);
    double ss_rows = 0, ss_cols = 0, ss_err = 0;
    for (double m : item_mean) ss_rows += (m - grand) * (m - grand);
    ss_rows *= static_cast<double>(k);
    for (double m : rater_mean) ss_cols += (m - grand) * (m - grand);
    ss_cols *= static_cast<double>(n);
    // residuals directly; SST - SSR - SSC cancels badly when raters agree
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t i = 0; i < n; ++i) {
            const double e = *ratings[r][i] - item_mean[i] - rater_mean[r] + grand;
            ss_err += e * e;
        }
    const double kd = static_cast<double>(k), nd = static_cast<double>(n);
    const double msr = ss_rows / (nd - 1);
    const double msc = ss_cols / (kd - 1);
    const double mse = ss_err / ((nd - 1) * (kd - 1));
    double denom = form == IccForm::icc_3_1 ? msr + (kd - 1) * mse
                                             : msr + (kd - 1) * mse + kd * (msc - mse) / nd;
    // Exact agreement everywhere leaves every mean square at (numerically) 0.
    const double scale = std::max({std::abs(msr), std::abs(msc), std::abs(mse)});
    if (scale < 1e-12 || std::abs(denom) < 1e-12 * std::max(1.0, scale)) return {1.0, true};
    return {(msr - mse) / denom, false};
}

ClassificationStats classification_stats(const BinaryConfusion& conf) {
    if (conf.tp < 0 || conf.fp < 0 || conf.tn < 0 || conf.fn < 0)
        throw ValidationError("confusion counts must be non-negative");
    if (conf.total() == 0) throw ValidationError("empty confusion matrix");
    ClassificationStats s;
    const double tp = static_cast<double>(conf.tp), fp = static_cast<double>(conf.fp);
    const double tn = static_cast<double>(conf.tn), fn = static_cast<double>(conf.fn);
    if (tp + fp > 0) s.precision = tp / (tp + fp);
    else s.precision_undefined = true;
    if (tp + fn > 0) s.recall = tp / (tp + fn);
    else s.recall_undefined = true;
    if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom > 0) s.mcc = (tp * tn - fp * fn) / std::sqrt(denom);
    else s.mcc_undefined = true;
    return s;
}

std::optional<std::pair<bool, bool>> extract_subtask(Score gt, Score pred, Subtask task) {
    check_score(gt, "ground-truth score");
    check_score(pred, "predicted score");
    const bool gt_broken = gt <= 2, pred_broken = pred <= 2;
    switch (task) {
        case Subtask::functionality:
            return std::pair{gt_broken, pred_broken};
        case Subtask::quality:
            if (gt < 3) return std::nullopt;
            return std::pair{gt <= 4, pred <= 4};
        case Subtask::effort: {
            if (gt_broken != pred_broken) return std::nullopt;
            if (!gt_broken && (gt <= 4) != (pred <= 4)) return std::nullopt;
            auto in_scope = [](Score s) { return s >= 1 && s <= 4; };
            if (!in_scope(gt) || !in_scope(pred)) return std::nullopt;
            return std::pair{gt == 1 || gt == 3, pred == 1 || pred == 3};
        }
    }
    return std::nullopt;
}

BinaryConfusion confusion_for(const std::vector<Score>& gt, const std::vector<Score>& pred, Subtask task) {
    if (gt.size() != pred.size()) throw ValidationError("paired score lists differ in length");
    BinaryConfusion c;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        auto cls = extract_subtask(gt[i], pred[i], task);
        if (!cls) continue;
        auto [truth, guess] = *cls;
        if (truth && guess) ++c.tp;
        else if (!truth && guess) ++c.fp;
        else if (!truth && !guess) ++c.tn;
        else ++c.fn;
    }
    return c;
}

ConsistencyStats consistency_stats(const RatingsTable& runs) {
    if (runs.size() < 2) throw ValidationError("consistency needs at least 2 runs");
    ConsistencyStats s;
    s.alpha = krippendorff_alpha(runs, AlphaLevel::ordinal);
    s.icc_3_1 = icc(runs, IccForm::icc_3_1);
    const std::size_t items = runs.front().size();
    std::size_t equal = 0;
    for (std::size_t i = 0; i < items; ++i) {
        bool same = true;
        for (const auto& run : runs) same = same && run[i] == runs.front()[i];
        equal += same ? 1 : 0;
    }
    s.eq_pct = items == 0 ? 0.0 : 100.0 * static_cast<double>(equal) / static_cast<double>(items);
    return s;
}

namespace {

GroupSummary summarize_group(const std::string& name, const std::vector<const PairedSample*>& rows) {
    GroupSummary g;
    g.group = name;
    g.n = rows.size();
    std::vector<double> gt, pred;
    for (const auto* r : rows) {
        gt.push_back(r->ground_truth);
        pred.push_back(r->predicted);
    }
    if (!pred.empty()) {
        g.mean = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(pred.size());
        if (pred.size() > 1) {
            double ss = 0;
            for (double v : pred) ss += (v - g.mean) * (v - g.mean);
            g.stddev = std::sqrt(ss / static_cast<double>(pred.size() - 1));
        }
    }
    try {
        g.rho = 100.0 * spearman_rho(gt, pred);
    } catch (const UndefinedResultError&) {}
    try {
        g.tau = 100.0 * kendall_tau_b(gt, pred);
    } catch (const UndefinedResultError&) {}
    if (rows.size() >= 1) {
        RatingsTable table(2);
        for (const auto* r : rows) {
            table[0].emplace_back(r->ground_truth);
            table[1].emplace_back(r->predicted);
        }
        try {
            g.alpha = 100.0 * krippendorff_alpha(table, AlphaLevel::ordinal).value;
        } catch (const UndefinedResultError&) {}
    }
    return g;
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.1f}", *v) : std::string("n/a"); }

}  // namespace

std::vector<GroupSummary> summarize(const std::vector<PairedSample>& samples) {
    std::map<std::string, std::vector<const PairedSample*>> groups;
    std::vector<const PairedSample*> all;
    for (const auto& s : samples) {
        groups[s.group].push_back(&s);
        all.push_back(&s);
    }
    std::vector<GroupSummary> out;
    for (const auto& [name, rows] : groups) out.push_back(summarize_group(name, rows));
    out.push_back(summarize_group("all", all));
    return out;
}

std::string format_summary_table(const std::string& metric, const std::vector<GroupSummary>& rows, bool header) {
    std::string out;
    if (header)
        out = fmt::format("{:<24} {:<10} {:>6} {:>14} {:>7} {:>7} {:>7}\n", "metric", "group", "n", "mean+-std", "rho",
                          "tau", "alpha");
    for (const auto& r : rows)
        out += fmt::format("{:<24} {:<10} {:>6} {:>14} {:>7} {:>7} {:>7}\n", metric, r.group, r.n,
                           fmt::format("{:.2f}+-{:.2f}", r.mean, r.stddev), cell(r.rho), cell(r.tau), cell(r.alpha));
    return out;
}

void to_json(Json& j, const GroupSummary& g) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    j = Json{{"group", g.group}, {"n", g.n},           {"mean", g.mean},       {"std", g.stddev},
             {"rho", opt(g.rho)}, {"tau", opt(g.tau)}, {"alpha", opt(g.alpha)}};
}

void to_json(Json& j, const Agreement& a) { j = Json{{"value", a.value}, {"degenerate", a.degenerate}}; }

void to_json(Json& j, const ClassificationStats& c) {
    j = Json{{"mcc", c.mcc},
             {"f1", c.f1},
             {"precision", c.precision},
             {"recall", c.recall},
             {"mcc_undefined", c.mcc_undefined}};
}

}  // namespace forge
