#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "forge/lexer.hpp"

namespace forge {

struct EditDistance {
    std::size_t raw = 0;
    double normalized = 0.0;  // raw / max(|a|, |b|); 0 for two empty sequences
};

// Unit-cost Levenshtein distance over tokens.
EditDistance token_edit_distance(const TokenSeq& a, const TokenSeq& b);

// 1 - normalized token edit distance.
double edit_similarity(const TokenSeq& candidate, const TokenSeq& reference);

// chrF++ on lex-rejoined texts: character n-grams 1..6 (whitespace removed)
// and word n-grams 1..2, precisions and recalls averaged over the orders
// present in both texts, then F-beta with beta = 2. Result in [0, 100].
double chrfpp(std::string_view candidate, std::string_view reference);

struct CodeBleuBreakdown {
    double bleu = 0.0;
    double weighted_ngram = 0.0;
    double syntax = 0.0;
    double dataflow = 0.0;
    bool dataflow_used = true;  // false when the reference yields no def-use edges
    bool parse_failed = false;
    double total = 0.0;
};

// CodeBLEU with equal weights on its four components. When data-flow cannot
// be extracted from the reference, that component is dropped and the other
// weights renormalized.
CodeBleuBreakdown codebleu(std::string_view candidate, std::string_view reference,
                           Language language);

struct NormalizationParams {
    double s_min = 0.0;
    double s_max = 1.0;

    void validate() const;
    // Min/max over a benchmark's raw scores.
    static NormalizationParams fit(const std::vector<double>& raw_scores);
};

// round(5 (raw - s_min) / (s_max - s_min)), ties away from zero.
int normalize_to_scale(double raw, const NormalizationParams& params);

class ProgramDistanceMatrix {
public:
    ProgramDistanceMatrix() = default;
    ProgramDistanceMatrix(std::vector<std::string> ids, std::vector<double> values);

    std::size_t size() const noexcept { return ids_.size(); }
    double at(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    // Dense square matrix from nested rows (handy for tests).
    static ProgramDistanceMatrix from_rows(const std::vector<std::vector<double>>& rows);

private:
    std::vector<std::string> ids_;
    std::vector<double> values_;
};

// Normalized token edit distance between every pair, each unordered pair
// computed once.
ProgramDistanceMatrix pairwise_matrix(const std::vector<std::string>& ids,
                                      const std::vector<TokenSeq>& programs, int workers = 1);

}  // namespace forge
