#include <doctest.h>

#include "forge/judges.hpp"
#include "helpers.hpp"

using namespace forge;

TEST_CASE("parse_score takes the last integer, N/5 gives N") {
    CHECK(parse_score("Score: 4") == 4);
    CHECK(parse_score("I'd say 3/5") == 3);
    CHECK(parse_score("3 / 5") == 3);
    CHECK(parse_score("Criteria 1 and 2 hold. Final: 5") == 5);
    CHECK(parse_score("rated 4.5 overall, so 4") == 4);
    CHECK(parse_score("no digits") == std::nullopt);
    CHECK(parse_score("final 9") == 9);  // range is checked by the caller
}

TEST_CASE("parse_fault_report accepts bare, fenced and embedded lists") {
    std::string item = R"({"location":"line 3","category":"logic","severity":"major","explanation":"off by one"})";
    auto bare = parse_fault_report("[" + item + "]");
    REQUIRE(bare);
    CHECK(bare->size() == 1);
    CHECK((*bare)[0].severity == "major");
    CHECK(parse_fault_report("Faults:\n```json\n[" + item + "]\n```\n")->size() == 1);
    CHECK(parse_fault_report("Here: [" + item + "," + item + "] done")->size() == 2);
    CHECK(parse_fault_report("[]")->empty());
    CHECK_FALSE(parse_fault_report(R"([{"location":"x"}])"));
    CHECK_FALSE(parse_fault_report("nothing wrong"));
    CHECK_FALSE(parse_fault_report(R"({"location":"x"})"));
}

TEST_CASE("metric names round-trip") {
    for (auto m : {Metric::ice, Metric::codejudge, Metric::chrfpp, Metric::codebleu, Metric::editsim})
        CHECK(parse_metric(to_string(m)) == m);
    CHECK(is_llm_metric(Metric::ice));
    CHECK_FALSE(is_llm_metric(Metric::editsim));
    CHECK_THROWS_AS(parse_metric("bleu"), ValidationError);
}

namespace {

struct JudgeFixture {
    std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>();
    std::unique_ptr<Gateway> gateway;
    PromptLibrary prompts = PromptLibrary::load(default_data_dir() / "prompts");
    JudgeContext ctx;
    Requirement req = testutil::echo_requirement();

    JudgeFixture() {
        MockProvider::Script good;
        good.entries.push_back({{"Fault report:"}, "Given the faults, 2"});
        good.entries.push_back({{"Evaluation form"}, "Mostly fine. 4/5"});
        good.fallback = R"([{"location":"l1","category":"logic","severity":"minor","explanation":"e"}])";
        mock->add_script("good", good);

        MockProvider::Script shy;  // needs one nudge for everything
        shy.entries.push_back({{"did not end with a valid score"}, "5"});
        shy.entries.push_back({{"not a valid JSON array"}, "[]"});
        shy.fallback = "hmm, hard to say";
        mock->add_script("shy", shy);

        MockProvider::Script wild;
        wild.fallback = "Score 7";
        mock->add_script("wild", wild);

        MockProvider::Script cut;
        cut.entries.push_back({{""}, "4", FinishReason::truncated});
        mock->add_script("cut", cut);

        gateway = std::make_unique<Gateway>(mock, ProviderConfig{}, CacheMode::off);
        ctx.gateway = gateway.get();
        ctx.prompts = &prompts;
        ctx.criteria = "0..5";
    }
};

}  // namespace

TEST_CASE("ICE judge") {
    JudgeFixture f;
    auto p = testutil::program("p", "echo", "print(input())\n");
    auto j = judge_ice(f.req, p, "good", f.ctx);
    CHECK(j.score == 4);
    CHECK(j.metric == Metric::ice);
    CHECK(j.model == "good");
    CHECK(j.rationale == "Mostly fine. 4/5");
    CHECK(j.template_digest.size() == 64);
    CHECK_NOTHROW(j.validate());
    CHECK(judge_ice(f.req, p, "shy", f.ctx).score == 5);
    CHECK_THROWS_AS(judge_ice(f.req, p, "wild", f.ctx), JudgmentError);
    CHECK_THROWS_AS(judge_ice(f.req, p, "cut", f.ctx), JudgmentError);
}

TEST_CASE("CodeJudge two-pass judge") {
    JudgeFixture f;
    auto p = testutil::program("p", "echo", "print(input())\n");
    auto j = judge_codejudge(f.req, p, "good", f.ctx);
    CHECK(j.score == 2);
    REQUIRE(j.fault_report);
    CHECK(j.fault_report->size() == 1);
    CHECK(j.fault_report->front().location == "l1");
    auto shy = judge_codejudge(f.req, p, "shy", f.ctx);
    CHECK(shy.score == 5);
    CHECK(shy.fault_report->empty());
    CHECK_THROWS_AS(judge_codejudge(f.req, p, "wild", f.ctx), JudgmentError);
    Json round = j;
    CHECK(Json(round.get<Judgment>()) == round);
}

TEST_CASE("judging matrix: skips done tuples, collects failures, normalizes") {
    JudgeFixture f;
    auto ref = testutil::program("ref", "echo", "line = input()\nprint(line)\n");
    std::vector<Program> programs{testutil::program("a", "echo", "line = input()\nprint(line)\n"),
                                  testutil::program("b", "echo", "x = input()\nprint(x)\n"),
                                  testutil::program("c", "echo", "import sys\nfor l in sys.stdin:\n    print(l.strip()[::-1])\n")};
    std::vector<JudgeSample> samples;
    for (const auto& p : programs) samples.push_back({&p, &f.req, ref.code});

    MatrixOptions opt;
    opt.metrics = {Metric::ice, Metric::editsim};
    opt.models = {"good", "wild"};
    opt.runs = 2;
    opt.workers = 3;
    std::set<JudgmentKey> done{{"a", "ice", "good", 1}};
    auto r = run_judging_matrix(samples, opt, f.ctx, done);
    CHECK(r.skipped == 1);
    // ice: 3 samples x 2 models x 2 runs, minus the skipped one; editsim 3 x 2
    CHECK(r.failures.size() == 6);
    CHECK(r.judgments.size() == 5 + 6);
    int top = 0, bottom = 0;
    for (const auto& j : r.judgments) {
        if (j.metric != Metric::editsim) continue;
        CHECK(j.model.empty());
        if (j.program_id == "a") CHECK(j.score == 5);
        top += j.score == 5;
        bottom += j.score == 0;
    }
    CHECK(top == 2);
    CHECK(bottom == 2);
    for (const auto& fail : r.failures) CHECK(std::get<2>(fail.key) == "wild");

    auto again = run_judging_matrix(samples, opt, f.ctx, done);
    REQUIRE(again.judgments.size() == r.judgments.size());
    for (std::size_t i = 0; i < r.judgments.size(); ++i) CHECK(Json(again.judgments[i]) == Json(r.judgments[i]));
}

TEST_CASE("constant rule-based scores do not divide by zero") {
    JudgeFixture f;
    auto p = testutil::program("a", "echo", "print(1)\n");
    std::vector<JudgeSample> samples{{&p, &f.req, "print(1)\n"}};
    MatrixOptions opt;
    opt.metrics = {Metric::chrfpp, Metric::codebleu, Metric::editsim};
    auto r = run_judging_matrix(samples, opt, f.ctx, {});
    CHECK(r.failures.empty());
    CHECK(r.judgments.size() == 3);
    for (const auto& j : r.judgments) CHECK(j.score == 0);
}
