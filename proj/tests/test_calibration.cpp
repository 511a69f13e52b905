#include <doctest.h>

#include <httplib.h>

#include "forge/annotation_server.hpp"
#include "forge/calibration.hpp"
#include "helpers.hpp"

using namespace forge;
using namespace std::chrono_literals;

TEST_CASE("final score mapping") {
    auto answer = [](bool perfect, std::optional<ChangeScope> scope, bool rewrite) {
        AnnotationAnswer a;
        a.quality_perfect = perfect;
        a.scope = scope;
        a.rewrite = rewrite;
        return a;
    };
    using F = FunctionalStatus;
    CHECK(derive_final_score(F::pass, answer(true, {}, false)) == 5);
    CHECK(derive_final_score(F::pass, answer(false, ChangeScope::tweak, false)) == 4);
    CHECK(derive_final_score(F::pass, answer(false, ChangeScope::refactor, false)) == 3);
    CHECK(derive_final_score(F::fail, answer(false, ChangeScope::tweak, false)) == 2);
    CHECK(derive_final_score(F::fail, answer(false, ChangeScope::refactor, false)) == 1);
    CHECK(derive_final_score(F::fail, answer(false, {}, true)) == 0);
    CHECK_THROWS_AS(derive_final_score(F::pass, answer(false, {}, true)), ValidationError);
    CHECK_THROWS_AS(derive_final_score(F::fail, answer(true, {}, false)), ValidationError);
    CHECK_THROWS_AS(derive_final_score(F::pass, answer(false, {}, false)), ValidationError);
    CHECK_THROWS_AS(derive_final_score(F::timeout, answer(true, {}, false)), ValidationError);
}

TEST_CASE("ancestor lookup") {
    std::map<std::string, Program> ps;
    ps["r"] = testutil::program("r", "q", "a");
    auto mid = testutil::program("m", "q", "b", 3, Origin::perturbed);
    mid.parent_id = "r";
    ps["m"] = mid;
    auto leaf = testutil::program("l", "q", "c", 2, Origin::perturbed);
    leaf.parent_id = "m";
    ps["l"] = leaf;
    CHECK(nearest_five_point_ancestor(ps["l"], ps) == "r");
    CHECK_FALSE(nearest_five_point_ancestor(ps["r"], ps));
    auto orphan = leaf;
    orphan.parent_id = "ghost";
    CHECK_THROWS_AS(nearest_five_point_ancestor(orphan, ps), ValidationError);
}

TEST_CASE("report assembly") {
    testutil::TempDir dir("report");
    auto req = testutil::echo_requirement("q");
    std::map<std::string, Program> ps;
    ps["r"] = testutil::program("r", "q", "print(input())\n");
    auto child = testutil::program("c", "q", "print(input())\nprint('extra')\n", 2, Origin::perturbed);
    child.parent_id = "r";
    child.rule_ids = {"off-by-one", "unknown-rule"};
    ps["c"] = child;
    auto same = testutil::program("s", "q", "print(input())\n", 4, Origin::perturbed);
    same.parent_id = "r";
    same.rule_ids = {"off-by-one"};
    ps["s"] = same;
    RuleSet rules{{{"off-by-one", "Shift a bound.", 2, "logic"}}};
    TestReport exec;
    exec.overall = FunctionalStatus::fail;

    AnalyzerConfig missing{{{Language::python, "no-such-linter-xyz {file}"}}, 5};
    auto root = assemble_report(ps["r"], req, ps, rules, exec, missing, {}, dir.path());
    CHECK(root.diff_note == "is root");
    CHECK(root.unified_diff.empty());
    CHECK_FALSE(root.static_analysis_available);
    CHECK(root.static_analysis.find("not found") != std::string::npos);
    CHECK_FALSE(root.llm_quality_available);

    AnalyzerConfig cat{{{Language::python, "cat {file}"}}, 5};
    auto r = assemble_report(ps["c"], req, ps, rules, exec, cat, {}, dir.path());
    CHECK(r.anchor_id == "r");
    CHECK(r.unified_diff.find("+print('extra')") != std::string::npos);
    REQUIRE(r.rule_sequence.size() == 2);
    CHECK(r.rule_sequence[0].instruction == "Shift a bound.");
    CHECK(r.rule_sequence[1].instruction == "(rule not in pack)");
    CHECK(r.static_analysis_available);
    CHECK(r.static_analysis == ps["c"].code);
    CHECK(r.execution_report.overall == FunctionalStatus::fail);

    auto s = assemble_report(ps["s"], req, ps, rules, exec, AnalyzerConfig{}, {}, dir.path());
    CHECK(s.unified_diff.empty());
    CHECK(s.diff_note == "identical to r");

    auto mock = std::make_shared<MockProvider>();
    MockProvider::Script qs;
    qs.fallback = "Readable, but prints an extra line.";
    mock->add_script("q", qs);
    Gateway g(mock, ProviderConfig{}, CacheMode::off);
    auto prompts = PromptLibrary::load(default_data_dir() / "prompts");
    auto withq = assemble_report(ps["c"], req, ps, rules, exec, AnalyzerConfig{}, {&g, &prompts, "q"}, dir.path());
    CHECK(withq.llm_quality_available);
    CHECK(withq.llm_quality_report == "Readable, but prints an extra line.");
    auto broken = assemble_report(ps["c"], req, ps, rules, exec, AnalyzerConfig{}, {&g, &prompts, "absent"}, dir.path());
    CHECK_FALSE(broken.llm_quality_available);

    Json j = r;
    CHECK(Json(j.get<DiagnosisReport>()) == j);
}

namespace {

struct ServiceFixture {
    testutil::TempDir dir{"annot"};
    DatasetStore store = DatasetStore::open(dir.path());
    std::chrono::system_clock::time_point now{std::chrono::seconds(1'700'000'000)};

    std::vector<AnnotationTask> tasks() const {
        std::vector<AnnotationTask> out;
        for (auto [id, status, target] : {std::tuple{"p1", FunctionalStatus::pass, 5},
                                          std::tuple{"p2", FunctionalStatus::fail, 2}}) {
            AnnotationTask t;
            t.program = testutil::program(id, "q", "x", target);
            t.program.functional_status = status;
            t.statement = "s";
            t.group = "custom/" + std::to_string(target);
            t.report.program_id = id;
            out.push_back(t);
        }
        return out;
    }

    AnnotationService make(bool dual) {
        return AnnotationService(store, tasks(), dual, 60s, [this] { return now; });
    }
};

Json submission(const std::string& who, Json answer) { return Json{{"annotator", who}, {"answer", answer}}; }

}  // namespace

TEST_CASE("annotation service: statuses and validation") {
    ServiceFixture f;
    auto svc = f.make(false);
    CHECK(svc.next_task("").status == 400);
    CHECK(svc.get_task("nope").status == 404);
    CHECK(svc.get_task("p1").body["program"]["id"] == "p1");
    CHECK(svc.submit("nope", submission("a", {{"quality_perfect", true}})).status == 404);

    auto bad = svc.submit("p1", submission("a", {{"rewrite", true}}));
    CHECK(bad.status == 422);
    CHECK(bad.body["fields"].contains("rewrite"));
    CHECK(svc.submit("p1", Json{{"answer", {{"quality_perfect", true}}}}).body["fields"].contains("annotator"));
    CHECK(svc.submit("p1", submission("a", {{"scope", "sideways"}})).status == 422);
    CHECK(svc.submit("p1", Json::array()).status == 422);

    auto ok = svc.submit("p1", submission("a", {{"quality_perfect", true}}));
    CHECK(ok.status == 200);
    CHECK(ok.body["final_score"] == 5);
    auto dup = svc.submit("p1", submission("a", {{"quality_perfect", true}}));
    CHECK(dup.status == 200);
    CHECK(dup.body["duplicate"] == true);
    CHECK(svc.submit("p1", submission("a", {{"scope", "tweak"}})).status == 409);
    CHECK(svc.submit("p1", submission("b", {{"scope", "tweak"}})).status == 409);
    CHECK(svc.record_count() == 1);
    CHECK(f.store.read_records("annotations.jsonl").size() == 1);
}

TEST_CASE("annotation service: leases and the queue") {
    ServiceFixture f;
    auto svc = f.make(false);
    CHECK(svc.next_task("a").body["program"]["id"] == "p1");
    CHECK(svc.next_task("b").body["program"]["id"] == "p2");  // p1 leased to a
    CHECK(svc.next_task("a").body["program"]["id"] == "p1");  // own lease
    f.now += 61s;
    CHECK(svc.next_task("c").body["program"]["id"] == "p1");  // leases expired
    svc.submit("p2", submission("b", {{"rewrite", true}}));
    CHECK(svc.submit("p1", submission("c", {{"scope", "refactor"}})).body["final_score"] == 3);
    CHECK(svc.next_task("a").status == 204);
    auto prog = svc.progress().body;
    CHECK(prog["selected"] == 2);
    CHECK(prog["annotated"] == 2);
    CHECK(prog["buckets"]["custom/2"]["annotated"] == 1);
    auto lines = svc.export_jsonl();
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);
    CHECK(lines.find("\"timestamp\":\"2023-11-14T22:14:21Z\"") != std::string::npos);
}

TEST_CASE("annotation service: dual annotation") {
    ServiceFixture f;
    auto svc = f.make(true);
    CHECK(svc.next_task("a").body["program"]["id"] == "p1");
    CHECK(svc.next_task("b").body["program"]["id"] == "p1");
    svc.submit("p1", submission("a", {{"quality_perfect", true}}));
    CHECK(svc.submit("p1", submission("b", {{"scope", "tweak"}})).status == 200);
    CHECK(svc.next_task("a").body["program"]["id"] == "p2");
    CHECK(svc.progress().body["annotated"] == 1);
}

TEST_CASE("annotation HTTP API") {
    ServiceFixture f;
    auto svc = f.make(false);
    AnnotationServer server(svc);
    int port = server.start("127.0.0.1", 0);
    httplib::Client c("127.0.0.1", port);
    CHECK(c.Get("/api/tasks/next")->status == 400);
    auto next = c.Get("/api/tasks/next?annotator=a");
    REQUIRE(next);
    CHECK(next->status == 200);
    CHECK(Json::parse(next->body)["program"]["id"] == "p1");
    CHECK(c.Get("/api/tasks/zzz")->status == 404);
    CHECK(c.Post("/api/tasks/p1/annotation", "{not json", "application/json")->status == 422);
    auto post = c.Post("/api/tasks/p1/annotation", submission("a", {{"scope", "tweak"}}).dump(), "application/json");
    CHECK(post->status == 200);
    CHECK(Json::parse(post->body)["final_score"] == 4);
    c.Post("/api/tasks/p2/annotation", submission("a", {{"scope", "tweak"}}).dump(), "application/json");
    auto empty = c.Get("/api/tasks/next?annotator=a");
    CHECK(empty->status == 204);
    CHECK(empty->body.empty());
    CHECK(Json::parse(c.Get("/api/progress")->body)["annotated"] == 2);
    CHECK(c.Get("/api/export")->body == svc.export_jsonl());
    server.stop();
}
