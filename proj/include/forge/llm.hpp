#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "forge/domain.hpp"
#include "forge/error.hpp"

namespace forge {

struct ChatRequest {
    std::string model;
    std::string system;
    std::vector<std::string> user_turns;
    double temperature = 0.0;
    int max_output_tokens = 8192;
    // Mixed into the cache key only; lets repeated live-sampling runs get
    // distinct cache entries.
    std::string salt;

    void validate() const;
};

enum class FinishReason { complete, truncated, refused, error };

struct ChatResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::complete;
    Json provider_meta = Json::object();
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string model;
};

// A retryable provider failure (rate limit, 5xx, dropped connection).
class TransientError : public TransportError {
public:
    using TransportError::TransportError;
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts,
                                               const std::string& model) = 0;
};

// Scripted provider for tests and offline runs. Per model, an ordered list of
// (matcher, response) pairs plus an optional default. A matcher is a list of
// substrings that must all occur in the last user turn; first match wins.
// Responses may contain `{{code}}`, replaced by the body of the first fenced
// code block found in the user turns.
//
// Embeddings are a pure function of the text: hashed bag-of-words features
// in a fixed dimension.
class MockProvider : public LlmProvider {
public:
    struct Entry {
        std::vector<std::string> match;
        std::string response;
        FinishReason finish = FinishReason::complete;
    };
    struct Script {
        std::vector<Entry> entries;
        std::optional<std::string> fallback;
    };

    MockProvider() = default;
    explicit MockProvider(const Json& script);
    static std::shared_ptr<MockProvider> from_file(const std::filesystem::path& path);

    void add_script(std::string model, Script script);
    void set_embedding_dimension(std::size_t dim) { embedding_dim_ = dim; }

    ChatResponse chat(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts,
                                       const std::string& model) override;

    std::size_t call_count() const noexcept { return calls_.load(); }

private:
    std::map<std::string, Script> scripts_;
    std::size_t embedding_dim_ = 8;
    std::atomic<std::size_t> calls_{0};
};

struct ProviderConfig {
    std::string endpoint;        // e.g. https://api.example.com/v1
    std::string credential_env;  // name of the environment variable holding the key
    int max_concurrent = 4;
    int retry_budget = 3;
    double backoff_initial_seconds = 1.0;
    std::filesystem::path cache_dir;  // empty disables caching

    void validate() const;
};

// OpenAI-compatible chat/embedding endpoint.
class HttpProvider : public LlmProvider {
public:
    explicit HttpProvider(ProviderConfig config);

    ChatResponse chat(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts,
                                       const std::string& model) override;

private:
    Json post(const std::string& path, const Json& body);

    ProviderConfig config_;
    std::string api_key_;
};

enum class CacheMode { off, read_write, replay_only };

// Uniform front door for all LLM traffic: caching, retries with exponential
// backoff and a bound on in-flight requests.
class Gateway {
public:
    Gateway(std::shared_ptr<LlmProvider> provider, ProviderConfig config,
            CacheMode mode = CacheMode::read_write);

    ChatResponse chat(const ChatRequest& request);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model);

    // Content hash of everything that influences the response.
    static std::string request_hash(const ChatRequest& request);

    // Highest number of simultaneously outstanding provider calls observed.
    int peak_in_flight() const noexcept { return peak_in_flight_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

private:
    template <class Fn>
    auto with_retries(Fn&& fn) -> decltype(fn());

    std::optional<Json> cache_get(const std::string& key) const;
    void cache_put(const std::string& key, const Json& value) const;

    std::shared_ptr<LlmProvider> provider_;
    ProviderConfig config_;
    CacheMode mode_;
    std::counting_semaphore<1024> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_in_flight_{0};
    std::atomic<std::size_t> cache_hits_{0};
    mutable std::mutex write_mutex_;
};

// Extracts the body of the last fenced code block (``` ... ```), if any.
std::optional<std::string> last_code_block(std::string_view text);
std::optional<std::string> first_code_block(std::string_view text);

void to_json(Json& j, const ChatResponse& r);
void from_json(const Json& j, ChatResponse& r);

}  // namespace forge
