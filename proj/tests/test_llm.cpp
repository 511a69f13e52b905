#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "forge/llm.hpp"
#include "forge/parallel.hpp"
#include "helpers.hpp"

using namespace forge;

namespace {

ChatRequest ask(const std::string& model, const std::string& text) {
    ChatRequest r;
    r.model = model;
    r.user_turns = {text};
    return r;
}

Json script() {
    return Json::parse(R"({
      "models": {
        "m": {
          "rules": [
            {"match": ["alpha", "beta"], "response": "both"},
            {"match": "alpha", "response": "only alpha"},
            {"match": "echo", "response": "got:\n```\n{{code}}\n```"},
            {"match": "cut", "response": "partial", "finish_reason": "truncated"}
          ],
          "default": "fallback"
        },
        "strict": {"rules": [{"match": "x", "response": "y"}]}
      },
      "embedding": {"dimension": 16}
    })");
}

class Flaky : public LlmProvider {
public:
    explicit Flaky(int failures) : failures_(failures) {}
    ChatResponse chat(const ChatRequest&) override {
        ++calls;
        if (failures_-- > 0) throw TransientError("503");
        return {"ok", FinishReason::complete, Json::object()};
    }
    std::vector<EmbeddingVector> embed(std::span<const std::string> t, const std::string& m) override {
        return std::vector<EmbeddingVector>(t.size(), EmbeddingVector{{1.0}, m});
    }
    std::atomic<int> calls{0};

private:
    int failures_;
};

class Slow : public LlmProvider {
public:
    ChatResponse chat(const ChatRequest& r) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return {r.user_turns.front(), FinishReason::complete, Json::object()};
    }
    std::vector<EmbeddingVector> embed(std::span<const std::string>, const std::string&) override { return {}; }
};

ProviderConfig config(const std::filesystem::path& cache = {}) {
    ProviderConfig c;
    c.cache_dir = cache;
    c.backoff_initial_seconds = 0.001;
    return c;
}

}  // namespace

TEST_CASE("mock matching: all substrings, first match, default") {
    MockProvider mock(script());
    CHECK(mock.chat(ask("m", "alpha and beta")).text == "both");
    CHECK(mock.chat(ask("m", "beta then alpha")).text == "both");
    CHECK(mock.chat(ask("m", "alpha only")).text == "only alpha");
    CHECK(mock.chat(ask("m", "nothing")).text == "fallback");
    CHECK(mock.chat(ask("m", "cut here")).finish_reason == FinishReason::truncated);
    CHECK_THROWS_AS(mock.chat(ask("strict", "nope")), ExternalError);
    CHECK_THROWS_AS(mock.chat(ask("unknown", "x")), ExternalError);
    CHECK(mock.call_count() == 7);
}

TEST_CASE("mock matches only the last user turn") {
    MockProvider mock(script());
    ChatRequest r = ask("m", "alpha beta");
    r.user_turns.push_back("plain");
    CHECK(mock.chat(r).text == "fallback");
}

TEST_CASE("mock substitutes the first fenced block of any user turn") {
    MockProvider mock(script());
    ChatRequest r = ask("m", "```python\nprint(1)\n```\n");
    r.user_turns.push_back("echo please");
    auto text = mock.chat(r).text;
    CHECK(text == "got:\n```\nprint(1)\n```");
    CHECK(last_code_block(text) == "print(1)\n");
}

TEST_CASE("code block helpers") {
    std::string t = "intro\n```py\na = 1\n```\nmid\n```\nb = 2\n```\n";
    CHECK(first_code_block(t) == "a = 1\n");
    CHECK(last_code_block(t) == "b = 2\n");
    CHECK_FALSE(last_code_block("no fences").has_value());
}

TEST_CASE("mock embeddings are deterministic and sized") {
    MockProvider mock(script());
    std::vector<std::string> texts{"sum two numbers", "sum two numbers", "reverse a string"};
    auto v = mock.embed(texts, "e");
    REQUIRE(v.size() == 3);
    CHECK(v[0].values.size() == 16);
    CHECK(v[0].values == v[1].values);
    CHECK(v[0].values != v[2].values);
}

TEST_CASE("request hash covers every input") {
    auto base = ask("m", "hi");
    auto h = Gateway::request_hash(base);
    CHECK(h.size() == 64);
    CHECK(Gateway::request_hash(base) == h);
    auto other = base;
    other.salt = "run-2";
    CHECK(Gateway::request_hash(other) != h);
    other = base;
    other.temperature = 0.5;
    CHECK(Gateway::request_hash(other) != h);
    other = base;
    other.system = "s";
    CHECK(Gateway::request_hash(other) != h);
    other = base;
    other.max_output_tokens = 10;
    CHECK(Gateway::request_hash(other) != h);
}

TEST_CASE("cache: read_write stores, replay_only serves and refuses misses") {
    testutil::TempDir dir("cache");
    auto mock = std::make_shared<MockProvider>(script());
    {
        Gateway g(mock, config(dir.path()), CacheMode::read_write);
        CHECK(g.chat(ask("m", "alpha")).text == "only alpha");
        CHECK(g.chat(ask("m", "alpha")).text == "only alpha");
        CHECK(g.cache_hits() == 1);
        g.chat(ask("m", "cut"));  // truncated responses are not cached
        g.embed({"a b", "c"}, "e");
    }
    CHECK(mock->call_count() == 3);
    Gateway replay(mock, config(dir.path()), CacheMode::replay_only);
    CHECK(replay.chat(ask("m", "alpha")).text == "only alpha");
    CHECK(replay.embed({"c", "a b"}, "e").size() == 2);
    CHECK_THROWS_AS(replay.chat(ask("m", "cut")), TransportError);
    CHECK_THROWS_AS(replay.chat(ask("m", "never seen")), TransportError);
    CHECK(mock->call_count() == 3);
    CHECK_THROWS_AS(Gateway(mock, config(), CacheMode::replay_only), ConfigError);
}

TEST_CASE("cache off never writes") {
    testutil::TempDir dir("nocache");
    auto mock = std::make_shared<MockProvider>(script());
    Gateway g(mock, config(dir.path()), CacheMode::off);
    g.chat(ask("m", "alpha"));
    g.chat(ask("m", "alpha"));
    CHECK(mock->call_count() == 2);
    CHECK(std::filesystem::is_empty(dir.path()));
}

TEST_CASE("transient errors are retried within the budget") {
    auto ok = std::make_shared<Flaky>(2);
    Gateway g(ok, config());
    CHECK(g.chat(ask("m", "x")).text == "ok");
    CHECK(ok->calls == 3);
    auto bad = std::make_shared<Flaky>(10);
    Gateway g2(bad, config());
    CHECK_THROWS_AS(g2.chat(ask("m", "x")), TransportError);
    CHECK(bad->calls == 4);  // first try plus three retries
}

TEST_CASE("in-flight requests never exceed the bound") {
    auto c = config();
    c.max_concurrent = 2;
    Gateway g(std::make_shared<Slow>(), c);
    std::vector<std::string> out(12);
    parallel_for(out.size(), 6, [&](std::size_t i) { out[i] = g.chat(ask("m", std::to_string(i))).text; });
    CHECK(g.peak_in_flight() <= 2);
    CHECK(g.peak_in_flight() >= 1);
    CHECK(out[7] == "7");
}

TEST_CASE("invalid requests are rejected before any call") {
    auto mock = std::make_shared<MockProvider>(script());
    Gateway g(mock, config());
    ChatRequest r = ask("m", "x");
    r.user_turns.clear();
    CHECK_THROWS_AS(g.chat(r), ValidationError);
    r = ask("", "x");
    CHECK_THROWS_AS(g.chat(r), ValidationError);
    CHECK(mock->call_count() == 0);
}

TEST_CASE("http provider speaks the chat and embedding wire format") {
    httplib::Server server;
    Json seen;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = Json::parse(req.body);
        Json reply{{"choices", {{{"message", {{"content", "pong"}}}, {"finish_reason", "length"}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        Json reply{{"data", {{{"index", 1}, {"embedding", {0.0, 1.0}}}, {{"index", 0}, {"embedding", {1.0, 0.0}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ProviderConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    HttpProvider http(c);
    ChatRequest r = ask("gpt", "ping");
    r.system = "sys";
    auto resp = http.chat(r);
    CHECK(resp.text == "pong");
    CHECK(resp.finish_reason == FinishReason::truncated);
    CHECK(seen["model"] == "gpt");
    CHECK(seen["messages"].size() == 2);
    CHECK(seen["messages"][0]["role"] == "system");
    std::vector<std::string> texts{"a", "b"};
    auto emb = http.embed(texts, "e");
    CHECK(emb[0].values == std::vector<double>{1.0, 0.0});
    CHECK(emb[1].values == std::vector<double>{0.0, 1.0});
    server.stop();
    t.join();

    ProviderConfig missing_key = c;
    missing_key.credential_env = "FORGE_TEST_KEY_THAT_IS_NOT_SET";
    CHECK_THROWS_AS(HttpProvider{missing_key}, ConfigError);
}
