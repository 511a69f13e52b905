#include <algorithm>
#include <cmath>
#include <map>

#include "forge/similarity.hpp"
#include "forge/syntax.hpp"

namespace forge {

namespace {

using Counts = std::map<std::vector<std::string>, int>;

Counts ngrams(const std::vector<std::string>& toks, std::size_t n) {
    Counts out;
    if (toks.size() < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                       toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return out;
}

double brevity_penalty(std::size_t cand, std::size_t ref) {
    if (cand == 0) return 0.0;
    if (cand >= ref) return 1.0;
    return std::exp(1.0 - static_cast<double>(ref) / static_cast<double>(cand));
}

// Geometric mean of clipped precisions over orders 1..min(4, |cand|).
// `unigram_weight` reweights order-1 matches; nullptr gives plain BLEU.
double bleu_score(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                  double (*unigram_weight)(const std::string&, Language), Language lang) {
    if (cand.empty() || ref.empty()) return 0.0;
    const std::size_t max_order = std::min<std::size_t>(4, cand.size());
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_order; ++n) {
        Counts c = ngrams(cand, n), r = ngrams(ref, n);
        double matched = 0.0, total = 0.0;
        for (const auto& [g, count] : c) {
            double w = (n == 1 && unigram_weight) ? unigram_weight(g[0], lang) : 1.0;
            auto it = r.find(g);
            int clip = it == r.end() ? 0 : std::min(count, it->second);
            matched += w * clip;
            total += w * count;
        }
        if (matched <= 0.0 || total <= 0.0) return 0.0;
        log_sum += std::log(matched / total);
    }
    return brevity_penalty(cand.size(), ref.size()) * std::exp(log_sum / static_cast<double>(max_order));
}

double keyword_weight(const std::string& tok, Language lang) { return is_keyword(tok, lang) ? 1.0 : 0.2; }

double clipped_overlap(const std::map<std::string, int>& cand, const std::map<std::string, int>& ref) {
    int ref_total = 0, matched = 0;
    for (const auto& [k, v] : ref) {
        ref_total += v;
        auto it = cand.find(k);
        if (it != cand.end()) matched += std::min(v, it->second);
    }
    if (ref_total == 0) return cand.empty() ? 1.0 : 0.0;
    return static_cast<double>(matched) / ref_total;
}

std::map<std::string, int> multiset(const std::vector<std::string>& items) {
    std::map<std::string, int> out;
    for (const auto& s : items) ++out[s];
    return out;
}

}  // namespace

CodeBleuBreakdown codebleu(std::string_view candidate, std::string_view reference, Language language) {
    const auto cand_tokens = lex_tokens(candidate, language);
    const auto ref_tokens = lex_tokens(reference, language);
    std::vector<std::string> c, r;
    for (const auto& t : cand_tokens) c.push_back(t.text);
    for (const auto& t : ref_tokens) r.push_back(t.text);

    CodeBleuBreakdown out;
    out.bleu = bleu_score(c, r, nullptr, language);
    out.weighted_ngram = bleu_score(c, r, keyword_weight, language);

    auto cand_tree = parse_structure(cand_tokens, language);
    auto ref_tree = parse_structure(ref_tokens, language);
    if (!cand_tree || !ref_tree) {
        out.parse_failed = true;
        out.syntax = 0.0;
    } else {
        out.syntax = clipped_overlap(subtree_signatures(*cand_tree), subtree_signatures(*ref_tree));
    }

    const auto ref_edges = dataflow_edges(ref_tokens, language);
    if (ref_edges.empty()) {
        out.dataflow_used = false;
        out.total = (out.bleu + out.weighted_ngram + out.syntax) / 3.0;
    } else {
        out.dataflow = clipped_overlap(multiset(dataflow_edges(cand_tokens, language)), multiset(ref_edges));
        out.total = 0.25 * (out.bleu + out.weighted_ngram + out.syntax + out.dataflow);
    }
    return out;
}

}  // namespace forge
