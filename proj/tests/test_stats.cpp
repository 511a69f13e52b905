#include <doctest.h>

#include <cmath>

#include "forge/calibration.hpp"
#include "forge/error.hpp"
#include "forge/stats.hpp"

using namespace forge;

TEST_CASE("rank correlations") {
    CHECK(spearman_rho({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    CHECK(spearman_rho({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman_rho({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5));
    CHECK(kendall_tau_b({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0));
    CHECK(kendall_tau_b({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(kendall_tau_b({1, 2, 2}, {1, 2, 3}) == doctest::Approx(2 / std::sqrt(6.0)));
    CHECK_THROWS_AS(spearman_rho({1, 1, 1}, {1, 2, 3}), UndefinedResultError);
    CHECK_THROWS_AS(kendall_tau_b({1}, {1}), UndefinedResultError);
    CHECK_THROWS_AS(spearman_rho({1, 2}, {1, 2, 3}), ValidationError);
}

TEST_CASE("Krippendorff alpha") {
    CHECK(krippendorff_alpha({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}).value == doctest::Approx(1.0));
    CHECK(krippendorff_alpha({{1.0, 2.0}, {2.0, 1.0}}, AlphaLevel::nominal).value == doctest::Approx(-0.5));
    // the unpaired second item carries no information
    RatingsTable t{{1.0, 4.0}, {1.0, std::nullopt}};
    RatingsTable u{{1.0, 2.0, 4.0}, {1.0, 2.0, std::nullopt}};
    CHECK(krippendorff_alpha(u, AlphaLevel::nominal).value == doctest::Approx(1.0));
    auto degenerate = krippendorff_alpha(t, AlphaLevel::nominal);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.value == 1.0);
    CHECK_THROWS_AS(krippendorff_alpha({{1.0, std::nullopt}, {std::nullopt, 2.0}}), UndefinedResultError);
    CHECK_THROWS_AS(krippendorff_alpha({{1.0}}), ValidationError);
}

TEST_CASE("ICC forms on a 3x3 table") {
    // raters x items; by hand: grand 23/9, MSR 37/9, MSC 7/9, MSE 11/18
    RatingsTable t{{1.0, 2.0, 3.0}, {2.0, 3.0, 3.0}, {1.0, 3.0, 5.0}};
    CHECK(icc(t, IccForm::icc_2_1).value == doctest::Approx(7.0 / 11).epsilon(1e-12));
    CHECK(icc(t, IccForm::icc_3_1).value == doctest::Approx(21.0 / 32).epsilon(1e-12));
    RatingsTable shifted{{1.0, 2.0, 4.0}, {3.0, 4.0, 6.0}};
    CHECK(icc(shifted, IccForm::icc_3_1).value == doctest::Approx(1.0));
    CHECK(icc(shifted, IccForm::icc_2_1).value < 1.0);
    auto flat = icc({{2.0, 2.0}, {2.0, 2.0}}, IccForm::icc_2_1);
    CHECK(flat.degenerate);
    CHECK(flat.value == 1.0);
    CHECK_THROWS_AS(icc({{1.0, std::nullopt}, {1.0, 2.0}}, IccForm::icc_3_1), ValidationError);
}

TEST_CASE("classification statistics") {
    auto perfect = classification_stats({3, 0, 2, 0});
    CHECK(perfect.mcc == doctest::Approx(1.0));
    CHECK(perfect.f1 == doctest::Approx(1.0));
    CHECK(classification_stats({1, 1, 1, 1}).mcc == doctest::Approx(0.0));
    auto w = classification_stats({2, 1, 1, 0});
    CHECK(w.mcc == doctest::Approx(2 / std::sqrt(12.0)));
    CHECK(w.precision == doctest::Approx(2.0 / 3));
    CHECK(w.recall == doctest::Approx(1.0));
    CHECK(w.f1 == doctest::Approx(0.8));
    auto none = classification_stats({0, 0, 3, 0});
    CHECK(none.mcc_undefined);
    CHECK(none.mcc == 0.0);
}

TEST_CASE("subtask extraction") {
    using P = std::pair<bool, bool>;
    CHECK(extract_subtask(2, 1, Subtask::functionality) == P{true, true});
    CHECK(extract_subtask(4, 2, Subtask::functionality) == P{false, true});
    CHECK_FALSE(extract_subtask(2, 5, Subtask::quality));
    CHECK(extract_subtask(5, 4, Subtask::quality) == P{false, true});
    CHECK(extract_subtask(3, 5, Subtask::quality) == P{true, false});
    CHECK(extract_subtask(1, 2, Subtask::effort) == P{true, false});
    CHECK(extract_subtask(3, 4, Subtask::effort) == P{true, false});
    CHECK_FALSE(extract_subtask(2, 3, Subtask::effort));  // functionality mismatch
    CHECK_FALSE(extract_subtask(4, 5, Subtask::effort));  // quality mismatch
    CHECK_FALSE(extract_subtask(0, 1, Subtask::effort));  // outside tweak/refactor
    auto c = confusion_for({1, 2, 3, 5}, {1, 1, 4, 5}, Subtask::functionality);
    CHECK(c.tp == 2);
    CHECK(c.tn == 2);
}

TEST_CASE("consistency of identical runs") {
    RatingsTable runs(5, {1.0, 3.0, 4.0, 2.0});
    auto c = consistency_stats(runs);
    CHECK(c.alpha.value == 1.0);
    CHECK(c.icc_3_1.value == 1.0);
    CHECK(c.eq_pct == 100.0);
    runs[4][0] = 2.0;
    CHECK(consistency_stats(runs).eq_pct == doctest::Approx(75.0));
}

TEST_CASE("group summaries") {
    std::vector<PairedSample> s{{"a", "py", 1, 1}, {"b", "py", 2, 3}, {"c", "py", 3, 2}, {"d", "cpp", 4, 4}, {"e", "cpp", 5, 5}};
    auto rows = summarize(s);
    REQUIRE(rows.size() == 3);
    CHECK(rows.back().group == "all");
    CHECK(rows.back().n == 5);
    CHECK(rows.back().mean == doctest::Approx(3.0));
    const auto& py = rows[1];
    CHECK(py.group == "py");
    CHECK(*py.rho == doctest::Approx(50.0));
    CHECK(rows[0].group == "cpp");
    CHECK(rows[0].rho.has_value());
    auto one = summarize({{"a", "g", 1, 1}});
    CHECK_FALSE(one[0].rho.has_value());
}

namespace {

AnnotationRecord rec(const std::string& p, const std::string& who, Score s) {
    AnnotationRecord r;
    r.program_id = p;
    r.annotator_id = who;
    r.functional_status = s >= 3 ? FunctionalStatus::pass : FunctionalStatus::fail;
    if (s == 5) r.answer.quality_perfect = true;
    else if (s == 0) r.answer.rewrite = true;
    else r.answer.scope = (s == 4 || s == 2) ? ChangeScope::tweak : ChangeScope::refactor;
    r.final_score = s;
    r.timestamp = "2025-01-01T00:00:00Z";
    return r;
}

}  // namespace

TEST_CASE("inter-rater summary") {
    std::vector<AnnotationRecord> rs{rec("p1", "a", 5), rec("p1", "b", 5), rec("p2", "a", 2), rec("p2", "b", 1),
                                     rec("p3", "a", 3), rec("p3", "b", 3), rec("p4", "a", 0)};
    auto s = interrater_summary(rs);
    CHECK(s.shared_items == 3);
    CHECK(s.exact_match_pct == doctest::Approx(200.0 / 3));
    CHECK(s.alpha.value < 1.0);
    CHECK(s.alpha.value > 0.0);
    CHECK_THROWS_AS(interrater_summary({rec("p1", "a", 5), rec("p2", "a", 4)}), ValidationError);
}
