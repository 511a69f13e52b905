#include "forge/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "forge/error.hpp"
#include "forge/parallel.hpp"

namespace forge {

EditDistance token_edit_distance(const TokenSeq& a, const TokenSeq& b) {
    const auto& x = a.tokens;
    const auto& y = b.tokens;
    std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= x.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= y.size(); ++j) {
            std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    EditDistance d;
    d.raw = prev[y.size()];
    const auto longer = std::max(x.size(), y.size());
    d.normalized = longer == 0 ? 0.0 : static_cast<double>(d.raw) / static_cast<double>(longer);
    return d;
}

double edit_similarity(const TokenSeq& candidate, const TokenSeq& reference) {
    return 1.0 - token_edit_distance(candidate, reference).normalized;
}

namespace {

using Counts = std::map<std::string, int>;

Counts char_ngrams(const std::string& text, std::size_t n) {
    Counts counts;
    if (text.size() < n) return counts;
    for (std::size_t i = 0; i + n <= text.size(); ++i) ++counts[text.substr(i, n)];
    return counts;
}

Counts word_ngrams(const std::vector<std::string>& words, std::size_t n) {
    Counts counts;
    if (words.size() < n) return counts;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        std::string key = words[i];
        for (std::size_t k = 1; k < n; ++k) key += '\x1f' + words[i + k];
        ++counts[key];
    }
    return counts;
}

struct NgramStats {
    int hyp = 0, ref = 0, match = 0;
};

NgramStats compare(const Counts& hyp, const Counts& ref) {
    NgramStats s;
    for (const auto& [g, c] : hyp) {
        s.hyp += c;
        if (auto it = ref.find(g); it != ref.end()) s.match += std::min(c, it->second);
    }
    for (const auto& [_, c] : ref) s.ref += c;
    return s;
}

std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace

double chrfpp(std::string_view candidate, std::string_view reference) {
    constexpr int kCharOrder = 6, kWordOrder = 2;
    constexpr double kBeta2 = 4.0;
    std::string hyp_chars, ref_chars;
    for (char c : candidate)
        if (!std::isspace(static_cast<unsigned char>(c))) hyp_chars += c;
    for (char c : reference)
        if (!std::isspace(static_cast<unsigned char>(c))) ref_chars += c;
    if (hyp_chars.empty() && ref_chars.empty()) return 100.0;
    if (hyp_chars.empty() || ref_chars.empty()) return 0.0;
    const auto hyp_words = split_ws(candidate);
    const auto ref_words = split_ws(reference);

    std::vector<NgramStats> stats;
    for (int n = 1; n <= kCharOrder; ++n)
        stats.push_back(compare(char_ngrams(hyp_chars, n), char_ngrams(ref_chars, n)));
    for (int n = 1; n <= kWordOrder; ++n)
        stats.push_back(compare(word_ngrams(hyp_words, n), word_ngrams(ref_words, n)));

    double precision = 0.0, recall = 0.0;
    int effective = 0;
    for (const auto& s : stats) {
        if (s.hyp == 0 || s.ref == 0) continue;
        precision += static_cast<double>(s.match) / s.hyp;
        recall += static_cast<double>(s.match) / s.ref;
        ++effective;
    }
    if (effective == 0) return 0.0;
    precision /= effective;
    recall /= effective;
    if (precision + recall == 0.0) return 0.0;
    return 100.0 * (1 + kBeta2) * precision * recall / (kBeta2 * precision + recall);
}

void NormalizationParams::validate() const {
    if (!(s_max > s_min))
        throw ValidationError("normalization needs s_max > s_min (got " + std::to_string(s_min) +
                              ", " + std::to_string(s_max) + ")");
}

NormalizationParams NormalizationParams::fit(const std::vector<double>& raw) {
    if (raw.empty()) throw ValidationError("cannot fit normalization on no scores");
    auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    return {*lo, *hi};
}

int normalize_to_scale(double raw, const NormalizationParams& params) {
    params.validate();
    if (raw < params.s_min || raw > params.s_max)
        throw ValidationError("raw score " + std::to_string(raw) + " outside [" +
                              std::to_string(params.s_min) + ", " + std::to_string(params.s_max) + "]");
    return static_cast<int>(std::round(5.0 * (raw - params.s_min) / (params.s_max - params.s_min)));
}

ProgramDistanceMatrix::ProgramDistanceMatrix(std::vector<std::string> ids, std::vector<double> values)
    : ids_(std::move(ids)), values_(std::move(values)) {
    if (values_.size() != ids_.size() * ids_.size())
        throw ValidationError("distance matrix size does not match id count");
}

ProgramDistanceMatrix ProgramDistanceMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<std::string> ids;
    std::vector<double> values;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ValidationError("distance matrix must be square");
        ids.push_back(std::to_string(i));
        values.insert(values.end(), rows[i].begin(), rows[i].end());
    }
    return {std::move(ids), std::move(values)};
}

ProgramDistanceMatrix pairwise_matrix(const std::vector<std::string>& ids,
                                      const std::vector<TokenSeq>& programs, int workers) {
    if (programs.size() < 2) throw ValidationError("pairwise matrix needs at least 2 programs");
    if (ids.size() != programs.size()) throw ValidationError("id count differs from program count");
    const std::size_t n = programs.size();
    std::vector<double> values(n * n, 0.0);
    parallel_for(n, workers, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = token_edit_distance(programs[i], programs[j]).normalized;
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    });
    return {ids, std::move(values)};
}

}  // namespace forge
