#pragma once

// Brute-force reference implementations used to cross-check the library.
// They follow the textbook definitions directly and favour clarity over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

inline std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    // memoized recursion on suffixes
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        auto key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::size_t best = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1)});
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

inline std::vector<double> mid_ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : x) {
            if (v < x[i]) ++less;
            else if (v == x[i]) ++equal;
        }
        r[i] = less + (equal + 1) / 2.0;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(mid_ranks(x), mid_ranks(y));
}

inline double tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    double c = 0, d = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) ++tx;
            else if (dy == 0) ++ty;
            else if ((dx > 0) == (dy > 0)) ++c;
            else ++d;
        }
    return (c - d) / std::sqrt((c + d + tx) * (c + d + ty));
}

enum class Level { nominal, ordinal, interval };

struct AlphaResult {
    double value;
    bool degenerate;
};

// Pairwise form: alpha = 1 - (n - 1) * sum_u sum_{i != j in u} delta / (m_u - 1)
//                            / sum_{i != j over all pairable values} delta
inline std::optional<AlphaResult> alpha(const std::vector<std::vector<std::optional<double>>>& table, Level level) {
    const std::size_t items = table.empty() ? 0 : table[0].size();
    std::vector<std::vector<double>> units;
    std::vector<double> all;
    for (std::size_t i = 0; i < items; ++i) {
        std::vector<double> u;
        for (const auto& rater : table)
            if (rater[i]) u.push_back(*rater[i]);
        if (u.size() >= 2) {
            units.push_back(u);
            all.insert(all.end(), u.begin(), u.end());
        }
    }
    if (all.size() < 2) return std::nullopt;
    std::map<double, double> freq;
    for (double v : all) ++freq[v];
    auto delta = [&](double c, double k) {
        if (level == Level::nominal) return c == k ? 0.0 : 1.0;
        if (level == Level::interval) return (c - k) * (c - k);
        if (c == k) return 0.0;
        const double lo = std::min(c, k), hi = std::max(c, k);
        double s = 0;
        for (const auto& [v, n] : freq)
            if (v >= lo && v <= hi) s += n;
        s -= (freq[lo] + freq[hi]) / 2.0;
        return s * s;
    };
    double within = 0;
    for (const auto& u : units) {
        double s = 0;
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < u.size(); ++j)
                if (i != j) s += delta(u[i], u[j]);
        within += s / static_cast<double>(u.size() - 1);
    }
    double between = 0;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = 0; j < all.size(); ++j)
            if (i != j) between += delta(all[i], all[j]);
    const double n = static_cast<double>(all.size());
    if (between == 0) return AlphaResult{1.0, true};
    return AlphaResult{1.0 - (n - 1) * within / between, false};
}

struct Anova {
    double msr, msc, mse;
};

// rows = items (targets), columns = raters
inline Anova anova(const std::vector<std::vector<double>>& raters_by_items) {
    const std::size_t k = raters_by_items.size(), n = raters_by_items[0].size();
    double grand = 0;
    for (const auto& r : raters_by_items)
        for (double v : r) grand += v;
    grand /= static_cast<double>(k * n);
    double ssr = 0, ssc = 0, sst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0;
        for (std::size_t j = 0; j < k; ++j) m += raters_by_items[j][i];
        m /= static_cast<double>(k);
        ssr += static_cast<double>(k) * (m - grand) * (m - grand);
    }
    for (std::size_t j = 0; j < k; ++j) {
        double m = 0;
        for (double v : raters_by_items[j]) m += v;
        m /= static_cast<double>(n);
        ssc += static_cast<double>(n) * (m - grand) * (m - grand);
    }
    for (const auto& r : raters_by_items)
        for (double v : r) sst += (v - grand) * (v - grand);
    const double sse = sst - ssr - ssc;
    const double dk = static_cast<double>(k), dn = static_cast<double>(n);
    return {ssr / (dn - 1), ssc / (dk - 1), sse / ((dn - 1) * (dk - 1))};
}

inline double icc21(const std::vector<std::vector<double>>& t) {
    auto a = anova(t);
    const double k = static_cast<double>(t.size()), n = static_cast<double>(t[0].size());
    return (a.msr - a.mse) / (a.msr + (k - 1) * a.mse + k * (a.msc - a.mse) / n);
}

inline double icc31(const std::vector<std::vector<double>>& t) {
    auto a = anova(t);
    const double k = static_cast<double>(t.size());
    return (a.msr - a.mse) / (a.msr + (k - 1) * a.mse);
}

struct Classification {
    double mcc, precision, recall, f1;
    bool mcc_defined, p_defined, r_defined;
};

inline Classification classify(double tp, double fp, double tn, double fn) {
    Classification c{};
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    c.mcc_defined = den > 0;
    c.mcc = c.mcc_defined ? (tp * tn - fp * fn) / std::sqrt(den) : 0.0;
    c.p_defined = tp + fp > 0;
    c.r_defined = tp + fn > 0;
    c.precision = c.p_defined ? tp / (tp + fp) : 0.0;
    c.recall = c.r_defined ? tp / (tp + fn) : 0.0;
    c.f1 = (c.precision + c.recall) > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    return c;
}

// Farthest-point criterion: each pick after the seed attains the maximum
// over remaining candidates of the minimum distance to earlier picks.
inline bool greedy_picks_are_optimal(const std::vector<std::vector<double>>& L, const std::vector<std::size_t>& picks) {
    for (std::size_t t = 1; t < picks.size(); ++t) {
        auto min_to_prefix = [&](std::size_t c) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < t; ++s) m = std::min(m, L[c][picks[s]]);
            return m;
        };
        const double got = min_to_prefix(picks[t]);
        for (std::size_t c = 0; c < L.size(); ++c) {
            if (std::find(picks.begin(), picks.begin() + static_cast<long>(t), c) != picks.begin() + static_cast<long>(t))
                continue;
            if (min_to_prefix(c) > got) return false;
        }
    }
    return true;
}

}  // namespace oracle
