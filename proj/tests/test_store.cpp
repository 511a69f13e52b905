#include <doctest.h>

#include <fstream>

#include "forge/error.hpp"
#include "forge/store.hpp"
#include "helpers.hpp"

using namespace forge;

TEST_CASE("stage order") {
    CHECK(predecessor_of("ingest").empty());
    CHECK(predecessor_of("verify") == "ingest");
    CHECK(predecessor_of("report") == "select");
    CHECK(predecessor_of("serve") == "report");
    CHECK(predecessor_of("judge") == "select");
    CHECK(predecessor_of("meta") == "judge");
    CHECK(predecessor_of("stats").empty());
    CHECK_THROWS_AS(predecessor_of("bake"), ValidationError);
}

TEST_CASE("stages must run in order") {
    testutil::TempDir dir("store-order");
    auto store = DatasetStore::open(dir.path());
    CHECK_THROWS_AS(store.require_ready("verify"), OrderingError);
    try {
        store.require_ready("perturb");
    } catch (const OrderingError& e) {
        CHECK(std::string(e.what()).find("augment") != std::string::npos);
        CHECK(e.exit_code() == 3);
    }
    CHECK_NOTHROW(store.require_ready("ingest"));
    store.begin_stage("ingest");
    CHECK(store.stage_started("ingest"));
    CHECK_FALSE(store.stage_complete("ingest"));
    CHECK_THROWS_AS(store.require_ready("verify"), OrderingError);
    store.complete_stage("ingest");
    CHECK_NOTHROW(store.require_ready("verify"));
}

TEST_CASE("records persist with digests and survive reopening") {
    testutil::TempDir dir("store-persist");
    {
        auto store = DatasetStore::open(dir.path());
        store.append("a.jsonl", Json{{"x", 1}});
        store.append_all("a.jsonl", {Json{{"x", 2}}, Json{{"x", 3}}});
        store.write("table.txt", "hello\n");
        CHECK(store.manifest()["files"]["a.jsonl"].get<std::string>().size() == 64);
    }
    auto again = DatasetStore::open(dir.path(), false);
    auto rows = again.read_records("a.jsonl");
    REQUIRE(rows.size() == 3);
    CHECK(rows[2]["x"] == 3);
    CHECK(again.read_records("missing.jsonl").empty());
    CHECK_THROWS_AS(DatasetStore::open(dir.path() / "nope", false), ValidationError);
}

TEST_CASE("tampering is detected on open") {
    testutil::TempDir dir("store-tamper");
    {
        auto store = DatasetStore::open(dir.path());
        store.append("a.jsonl", Json{{"x", 1}});
    }
    std::ofstream(dir / "a.jsonl", std::ios::app) << "{\"x\":2}\n";
    CHECK_THROWS_AS(DatasetStore::open(dir.path()), ValidationError);
}

TEST_CASE("an interrupted stage is rolled back on restart") {
    testutil::TempDir dir("store-rollback");
    {
        auto store = DatasetStore::open(dir.path());
        store.begin_stage("ingest");
        store.append("a.jsonl", Json{{"x", 1}});
        store.complete_stage("ingest");
        store.begin_stage("verify");
        store.append("a.jsonl", Json{{"x", 2}});
        store.append("b.jsonl", Json{{"y", 1}});
        // crash before completion
    }
    auto store = DatasetStore::open(dir.path());
    CHECK(store.stage_started("verify"));
    store.begin_stage("verify");
    CHECK(store.read_records("a.jsonl").size() == 1);
    CHECK_FALSE(store.exists("b.jsonl"));
    store.append("b.jsonl", Json{{"y", 2}});
    store.complete_stage("verify");
    CHECK(store.read_records("b.jsonl").front()["y"] == 2);
}

TEST_CASE("resumable stages keep their partial output") {
    testutil::TempDir dir("store-resume");
    auto store = DatasetStore::open(dir.path());
    store.begin_stage("judge", true);
    store.append("judgments.jsonl", Json{{"n", 1}});
    store.begin_stage("judge", true);
    store.append("judgments.jsonl", Json{{"n", 2}});
    CHECK(store.read_records("judgments.jsonl").size() == 2);
}

TEST_CASE("typed reads") {
    testutil::TempDir dir("store-typed");
    auto store = DatasetStore::open(dir.path());
    std::vector<Program> ps{testutil::program("a", "r", "x"), testutil::program("b", "r", "y", 3)};
    store.append_items("programs.jsonl", ps);
    auto back = store.read<Program>("programs.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[1].target_score == 3);
    CHECK(store.read<Program>("none.jsonl").empty());
}
