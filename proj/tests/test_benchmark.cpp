#include <doctest.h>

#include "forge/benchmark.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace forge;

namespace {

AnnotationRecord annotated(const std::string& pid, const std::string& who, Score s) {
    AnnotationRecord r;
    r.program_id = pid;
    r.annotator_id = who;
    r.final_score = s;
    return r;
}

}  // namespace

TEST_CASE("ground truth precedence") {
    auto ref = testutil::program("ref", "q", "x");
    auto stored = testutil::program("stored", "q", "x", 3, Origin::perturbed);
    stored.final_score = 4;
    auto ann = testutil::program("ann", "q", "x", 2, Origin::perturbed);
    auto bare = testutil::program("bare", "q", "x", 1, Origin::perturbed);
    auto zero = testutil::program("zero", "q", "x", 0, Origin::disrupted);
    std::vector<AnnotationRecord> records{annotated("ann", "a", 1), annotated("ann", "b", 2), annotated("zero", "a", 5),
                                          annotated("stored", "a", 0)};
    auto gt = ground_truth_scores({ref, stored, ann, bare, zero}, records, false);
    CHECK(gt.at("zero") == 0);
    CHECK(gt.at("stored") == 4);
    CHECK(gt.at("ann") == 1);  // earliest annotation
    CHECK_FALSE(gt.count("bare"));
    CHECK_FALSE(gt.count("ref"));
    auto fb = ground_truth_scores({ref, bare}, {}, true);
    CHECK(fb.at("ref") == 5);
    CHECK(fb.at("bare") == 1);
}

TEST_CASE("disrupted clones take the language of their source program") {
    auto py = testutil::echo_requirement("py");
    auto cpp = testutil::echo_requirement("cpp", Language::cpp);
    std::map<std::string, Requirement> reqs{{"py", py}, {"cpp", cpp}};
    auto src = testutil::program("c1", "cpp", "int main(){}");
    auto clone = testutil::program("py-z-0", "py", "int main(){}", 0, Origin::disrupted);
    clone.parent_id = "c1";
    std::map<std::string, Program> ps{{"c1", src}, {"py-z-0", clone}};
    CHECK(program_language(clone, ps, reqs) == Language::cpp);
    CHECK(program_language(src, ps, reqs) == Language::cpp);
}

TEST_CASE("benchmark statistics on a hand-counted set") {
    auto r1 = testutil::echo_requirement("r1");
    auto r2 = testutil::echo_requirement("r2");
    std::vector<Program> ps{testutil::program("a", "r1", "x = 1\n\ny = 2\n"),               // 2 LoC, 6 tokens
                            testutil::program("b", "r1", "print(x)\n", 3, Origin::perturbed),  // 1 LoC, 4 tokens
                            testutil::program("c", "r2", "pass\n", 0, Origin::disrupted)};     // 1 LoC, 1 token
    ps[1].parent_id = "a";
    ps[1].rule_ids = {"r"};
    ps[2].parent_id = "a";
    auto stats = compute_benchmark_stats(ps, {r1, r2}, {"a", "c"}, {{"a", 5}});
    const auto& u = stats.unverified;
    CHECK(u.total == 3);
    CHECK(u.per_score[5] == 1);
    CHECK(u.per_score[3] == 1);
    CHECK(u.per_score[0] == 1);
    CHECK(u.requirements == 2);
    CHECK(u.avg_loc == doctest::Approx(4.0 / 3));
    CHECK(u.avg_tokens == doctest::Approx(11.0 / 3));
    const auto& v = stats.verified;
    CHECK(v.total == 2);
    CHECK(v.per_score[5] == 1);
    CHECK(v.unscored == 1);
    auto table = format_benchmark_table(stats);
    CHECK(table.find("Unv.") != std::string::npos);
    CHECK(table.find("V.") != std::string::npos);
}

TEST_CASE("meta report against brute-force statistics") {
    std::map<std::string, Score> gt{{"p0", 0}, {"p1", 1}, {"p2", 2}, {"p3", 3}, {"p4", 4}, {"p5", 5}};
    std::vector<int> pred{0, 2, 1, 3, 5, 5};
    std::vector<Judgment> js;
    for (int run = 1; run <= 2; ++run)
        for (int i = 0; i < 6; ++i) {
            Judgment j;
            j.program_id = "p" + std::to_string(i);
            j.metric = Metric::ice;
            j.model = "m";
            j.run = run;
            j.score = run == 2 && i == 0 ? 1 : pred[static_cast<std::size_t>(i)];
            js.push_back(j);
        }
    Judgment stray;
    stray.program_id = "unknown";
    stray.metric = Metric::ice;
    stray.model = "m";
    js.push_back(stray);

    std::map<std::string, std::string> group;
    for (auto& [id, _] : gt) group[id] = id < "p3" ? "python" : "cpp";
    auto reports = build_meta_report(js, gt, group);
    REQUIRE(reports.size() == 1);
    const auto& r = reports[0];
    CHECK(r.samples == 6);
    const auto& all = r.correlation.back();
    std::vector<double> x{0, 1, 2, 3, 4, 5}, y(pred.begin(), pred.end());
    CHECK(*all.rho == doctest::Approx(100 * oracle::spearman(x, y)));
    CHECK(*all.tau == doctest::Approx(100 * oracle::tau_b(x, y)));
    REQUIRE(r.consistency);
    CHECK(r.consistency_items == 6);
    CHECK(r.consistency->eq_pct == doctest::Approx(500.0 / 6));
    // functionality over all six: gt positive iff score <= 2
    const auto& func = r.subtasks[0];
    CHECK(func.confusion.tp == 3);
    CHECK(func.confusion.tn == 3);
    CHECK(func.stats->mcc == doctest::Approx(1.0));
    auto text = format_meta_tables(reports);
    CHECK(text.find("ice@m") != std::string::npos);
}
