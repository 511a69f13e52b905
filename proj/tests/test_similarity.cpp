#include <doctest.h>

#include <random>

#include "forge/diff.hpp"
#include "forge/error.hpp"
#include "forge/lexer.hpp"
#include "forge/similarity.hpp"
#include "forge/syntax.hpp"
#include "oracles.hpp"

using namespace forge;

namespace {

TokenSeq seq(std::initializer_list<const char*> toks) {
    TokenSeq s;
    for (auto t : toks) s.tokens.push_back(t);
    return s;
}

}  // namespace

TEST_CASE("lexer drops comments and keeps literals whole") {
    auto py = lex("x += 1  # note\ns = 'a # b'\n", Language::python);
    CHECK(py.tokens == std::vector<std::string>{"x", "+=", "1", "s", "=", "'a # b'"});
    auto cpp = lex("int a = b->c; /* gone */ // also gone\n", Language::cpp);
    CHECK(cpp.tokens == std::vector<std::string>{"int", "a", "=", "b", "->", "c", ";"});
    auto prefixed = lex("r'\\d+' f\"{x}\"", Language::python);
    CHECK(prefixed.tokens.size() == 2);
    auto toks = lex_tokens("def f():\n    return 1\n", Language::python);
    CHECK(toks[0].kind == TokenKind::keyword);
    CHECK(toks[1].kind == TokenKind::identifier);
    CHECK(toks[5].indent == 4);
    CHECK(toks[5].line_start);
    CHECK(is_keyword("while", Language::java));
    CHECK_FALSE(is_keyword("while_", Language::java));
}

TEST_CASE("token edit distance matches a recursive oracle") {
    CHECK(token_edit_distance(seq({"a", "b", "c"}), seq({"a", "c"})).raw == 1);
    CHECK(token_edit_distance(seq({"a", "b", "c"}), seq({"a", "c"})).normalized == doctest::Approx(1.0 / 3));
    CHECK(token_edit_distance(seq({}), seq({})).normalized == 0.0);
    CHECK(edit_similarity(seq({"x"}), seq({"x"})) == 1.0);
    std::mt19937_64 gen(5);
    for (int i = 0; i < 300; ++i) {
        TokenSeq a, b;
        for (auto* s : {&a, &b}) {
            int n = std::uniform_int_distribution<int>(0, 7)(gen);
            for (int k = 0; k < n; ++k) s->tokens.push_back(std::string(1, char('a' + gen() % 3)));
        }
        CHECK(token_edit_distance(a, b).raw == oracle::edit_distance(a.tokens, b.tokens));
    }
}

TEST_CASE("chrF++ hand-computed values") {
    // char orders 1,2 present in both: P=(1,1) R=(2/3,1/2); word unigram P=R=0
    // P=2/3, R=7/18, F2 = 5PR/(4P+R) = 14/33
    CHECK(chrfpp("ab", "abc") == doctest::Approx(100.0 * 14 / 33).epsilon(1e-12));
    CHECK(chrfpp("same text", "same text") == doctest::Approx(100.0));
    CHECK(chrfpp("", "abc") == 0.0);
    CHECK(chrfpp("xyz", "abc") == 0.0);
}

TEST_CASE("CodeBLEU components and fallbacks") {
    const std::string ref = "def f(xs):\n    total = 0\n    for x in xs:\n        total += x\n    return total\n";
    auto same = codebleu(ref, ref, Language::python);
    CHECK(same.total == doctest::Approx(1.0));
    CHECK(same.dataflow_used);

    auto no_flow = codebleu("print(2)\n", "print(1)\n", Language::python);
    CHECK_FALSE(no_flow.dataflow_used);
    CHECK(no_flow.total == doctest::Approx((no_flow.bleu + no_flow.weighted_ngram + no_flow.syntax) / 3));

    auto broken = codebleu("def f(:\n  x = 1\n    y = 2\n", ref, Language::python);
    CHECK(broken.parse_failed);
    CHECK(broken.syntax == 0.0);

    const std::string cpp = "#include <cstdio>\nint main() { int a = 1; int b = a + 2; printf(\"%d\", b); }\n";
    auto c = codebleu(cpp, cpp, Language::cpp);
    CHECK(c.total == doctest::Approx(1.0));
    auto d = codebleu("int main() { return 0; }\n", cpp, Language::cpp);
    for (double v : {d.bleu, d.weighted_ngram, d.syntax, d.dataflow, d.total}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("data-flow edges normalize variable names") {
    auto a = dataflow_edges(lex_tokens("a = 1\nb = a + 2\n", Language::python), Language::python);
    auto b = dataflow_edges(lex_tokens("x = 1\ny = x + 2\n", Language::python), Language::python);
    CHECK(a == b);
    CHECK_FALSE(a.empty());
}

TEST_CASE("normalize_to_scale endpoints, rounding and range") {
    NormalizationParams p{0, 10};
    CHECK(normalize_to_scale(0, p) == 0);
    CHECK(normalize_to_scale(10, p) == 5);
    CHECK(normalize_to_scale(5, p) == 3);  // 2.5 rounds away from zero
    CHECK(normalize_to_scale(1, p) == 1);  // 0.5 likewise
    CHECK_THROWS_AS(normalize_to_scale(11, p), ValidationError);
    CHECK_THROWS_AS(normalize_to_scale(1, NormalizationParams{2, 2}), ValidationError);
    auto fit = NormalizationParams::fit({3, 1, 2});
    CHECK(fit.s_min == 1);
    CHECK(fit.s_max == 3);
}

TEST_CASE("pairwise matrix is symmetric with zero diagonal") {
    std::vector<TokenSeq> progs{lex("a = 1", Language::python), lex("a = 2", Language::python),
                                lex("print(a)", Language::python)};
    auto m = pairwise_matrix({"x", "y", "z"}, progs, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(m.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 3; ++j) CHECK(m.at(i, j) == m.at(j, i));
    }
    CHECK(m.at(0, 1) == doctest::Approx(1.0 / 3));
}

TEST_CASE("unified diff") {
    CHECK(unified_diff("a\nb\n", "a\nb\n").empty());
    auto d = unified_diff("a\nb\nc\n", "a\nB\nc\n");
    CHECK(d.find("--- a") != std::string::npos);
    CHECK(d.find("+++ b") != std::string::npos);
    CHECK(d.find("@@ -1,3 +1,3 @@") != std::string::npos);
    CHECK(d.find("\n-b\n") != std::string::npos);
    CHECK(d.find("\n+B\n") != std::string::npos);
}
