#include "forge/llm.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "forge/error.hpp"
#include "forge/hashing.hpp"
#include "forge/jsonl.hpp"

namespace forge {

namespace {

const char* finish_name(FinishReason f) {
    switch (f) {
        case FinishReason::complete: return "complete";
        case FinishReason::truncated: return "truncated";
        case FinishReason::refused: return "refused";
        case FinishReason::error: return "error";
    }
    return "error";
}

FinishReason parse_finish(const std::string& s) {
    if (s == "complete") return FinishReason::complete;
    if (s == "truncated") return FinishReason::truncated;
    if (s == "refused") return FinishReason::refused;
    if (s == "error") return FinishReason::error;
    throw ValidationError("unknown finish reason '" + s + "'");
}

std::vector<std::pair<std::size_t, std::string>> code_blocks(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string>> blocks;
    std::istringstream in{std::string(text)};
    std::string line;
    bool inside = false;
    std::string body;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        auto trimmed = line.substr(0, line.find_last_not_of(" \t\r") + 1);
        auto lead = trimmed.find_first_not_of(" \t");
        bool fence = lead != std::string::npos && trimmed.compare(lead, 3, "```") == 0;
        if (fence) {
            if (inside) {
                blocks.emplace_back(index++, body);
                body.clear();
            }
            inside = !inside;
            continue;
        }
        if (inside) body += line + "\n";
    }
    return blocks;
}

}  // namespace

std::optional<std::string> last_code_block(std::string_view text) {
    auto blocks = code_blocks(text);
    if (blocks.empty()) return std::nullopt;
    return blocks.back().second;
}

std::optional<std::string> first_code_block(std::string_view text) {
    auto blocks = code_blocks(text);
    if (blocks.empty()) return std::nullopt;
    return blocks.front().second;
}

void to_json(Json& j, const ChatResponse& r) {
    j = Json{{"text", r.text},
             {"finish_reason", finish_name(r.finish_reason)},
             {"provider_meta", r.provider_meta}};
}

void from_json(const Json& j, ChatResponse& r) {
    j.at("text").get_to(r.text);
    r.finish_reason = parse_finish(j.at("finish_reason").get<std::string>());
    r.provider_meta = j.value("provider_meta", Json::object());
}

void ChatRequest::validate() const {
    if (model.empty()) throw ValidationError("chat request without model");
    if (temperature < 0) throw ValidationError("temperature must be >= 0");
    if (max_output_tokens <= 0) throw ValidationError("max_output_tokens must be > 0");
    if (user_turns.empty()) throw ValidationError("chat request without user turns");
}

// ---------------------------------------------------------------- mock

MockProvider::MockProvider(const Json& script) {
    for (const auto& [model, body] : script.at("models").items()) {
        Script s;
        for (const auto& rule : body.value("rules", Json::array())) {
            Entry e;
            const auto& m = rule.at("match");
            if (m.is_string())
                e.match.push_back(m.get<std::string>());
            else
                e.match = m.get<std::vector<std::string>>();
            e.response = rule.at("response").get<std::string>();
            if (rule.contains("finish_reason"))
                e.finish = parse_finish(rule["finish_reason"].get<std::string>());
            s.entries.push_back(std::move(e));
        }
        if (body.contains("default")) s.fallback = body["default"].get<std::string>();
        scripts_.emplace(model, std::move(s));
    }
    if (script.contains("embedding"))
        embedding_dim_ = script["embedding"].value("dimension", std::size_t{8});
    if (embedding_dim_ == 0) throw ConfigError("mock embedding dimension must be positive");
}

std::shared_ptr<MockProvider> MockProvider::from_file(const std::filesystem::path& path) {
    try {
        return std::make_shared<MockProvider>(Json::parse(read_file(path)));
    } catch (const Json::exception& e) {
        throw ConfigError("mock script " + path.string() + ": " + e.what());
    }
}

void MockProvider::add_script(std::string model, Script script) {
    scripts_.insert_or_assign(std::move(model), std::move(script));
}

ChatResponse MockProvider::chat(const ChatRequest& request) {
    ++calls_;
    auto it = scripts_.find(request.model);
    if (it == scripts_.end()) {
        std::string known;
        for (const auto& [name, _] : scripts_) known += (known.empty() ? "" : ", ") + name;
        throw ExternalError("mock provider has no script for model '" + request.model +
                            "'; available scripts: [" + known + "]");
    }
    const std::string& turn = request.user_turns.back();
    const Script& script = it->second;
    const Entry* hit = nullptr;
    for (const auto& e : script.entries) {
        bool all = true;
        for (const auto& needle : e.match)
            if (turn.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        if (all) {
            hit = &e;
            break;
        }
    }
    ChatResponse response;
    if (hit) {
        response.text = hit->response;
        response.finish_reason = hit->finish;
    } else if (script.fallback) {
        response.text = *script.fallback;
    } else {
        throw ExternalError("mock script for '" + request.model + "' has no match and no default");
    }
    constexpr std::string_view kCode = "{{code}}";
    if (response.text.find(kCode) != std::string::npos) {
        std::string code;
        for (const auto& t : request.user_turns)
            if (auto block = first_code_block(t)) {
                code = *block;
                break;
            }
        if (!code.empty() && code.back() == '\n') code.pop_back();
        std::size_t pos = 0;
        while ((pos = response.text.find(kCode, pos)) != std::string::npos) {
            response.text.replace(pos, kCode.size(), code);
            pos += code.size();
        }
    }
    response.provider_meta = Json{{"provider", "mock"}};
    return response;
}

std::vector<EmbeddingVector> MockProvider::embed(std::span<const std::string> texts,
                                                 const std::string& model) {
    ++calls_;
    std::vector<EmbeddingVector> out;
    for (const auto& text : texts) {
        std::vector<double> v(embedding_dim_, 0.0);
        std::string word;
        auto flush = [&] {
            if (word.empty()) return;
            std::uint64_t h = 1469598103934665603ULL;
            for (unsigned char c : word) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            v[h % embedding_dim_] += (h >> 63) ? -1.0 : 1.0;
            word.clear();
        };
        for (unsigned char c : text) {
            if (std::isalnum(c))
                word += static_cast<char>(std::tolower(c));
            else
                flush();
        }
        flush();
        bool zero = true;
        for (double x : v) zero = zero && x == 0.0;
        if (zero) v[0] = 1.0;
        out.push_back({std::move(v), model});
    }
    return out;
}

// ---------------------------------------------------------------- http

void ProviderConfig::validate() const {
    if (max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");
    if (retry_budget < 0) throw ConfigError("retry_budget must be >= 0");
}

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.endpoint.empty()) throw ConfigError("http provider needs an endpoint");
    if (!config_.credential_env.empty()) {
        const char* key = std::getenv(config_.credential_env.c_str());
        if (!key || !*key)
            throw ConfigError("credential variable " + config_.credential_env + " is not set");
        api_key_ = key;
    }
}

Json HttpProvider::post(const std::string& path, const Json& body) {
    // endpoint = scheme://host[:port][/prefix]
    const auto& ep = config_.endpoint;
    auto scheme_end = ep.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint lacks a scheme: " + ep);
    auto path_start = ep.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? ep : ep.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : ep.substr(path_start);
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(base);
    client.set_read_timeout(600, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(prefix + path, headers, body.dump(), "application/json");
    if (!res) throw TransientError("request to " + ep + path + " failed: " +
                                   httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransientError("provider returned HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw TransportError("provider returned HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 500));
    try {
        return Json::parse(res->body);
    } catch (const Json::exception& e) {
        throw TransportError(std::string("unparseable provider response: ") + e.what());
    }
}

ChatResponse HttpProvider::chat(const ChatRequest& request) {
    Json messages = Json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    for (const auto& turn : request.user_turns)
        messages.push_back({{"role", "user"}, {"content", turn}});
    Json body{{"model", request.model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}};
    Json reply = post("/chat/completions", body);
    ChatResponse out;
    const auto& choice = reply.at("choices").at(0);
    const auto& content = choice.at("message").value("content", Json());
    out.text = content.is_string() ? content.get<std::string>() : "";
    std::string finish = choice.value("finish_reason", "stop");
    if (finish == "length")
        out.finish_reason = FinishReason::truncated;
    else if (finish == "content_filter")
        out.finish_reason = FinishReason::refused;
    else
        out.finish_reason = FinishReason::complete;
    out.provider_meta = Json{{"provider", "http"}, {"model", reply.value("model", request.model)}};
    if (reply.contains("usage")) out.provider_meta["usage"] = reply["usage"];
    return out;
}

std::vector<EmbeddingVector> HttpProvider::embed(std::span<const std::string> texts,
                                                 const std::string& model) {
    Json body{{"model", model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    Json reply = post("/embeddings", body);
    std::vector<EmbeddingVector> out(texts.size());
    for (const auto& item : reply.at("data")) {
        auto index = item.value("index", std::size_t{0});
        if (index >= out.size()) throw TransportError("embedding index out of range");
        out[index] = {item.at("embedding").get<std::vector<double>>(), model};
    }
    return out;
}

// ---------------------------------------------------------------- gateway

Gateway::Gateway(std::shared_ptr<LlmProvider> provider, ProviderConfig config, CacheMode mode)
    : provider_(std::move(provider)),
      config_(std::move(config)),
      mode_(config_.cache_dir.empty() ? CacheMode::off : mode),
      slots_(std::clamp(config_.max_concurrent, 1, 1024)) {
    config_.validate();
    if (!provider_) throw ConfigError("gateway without provider");
    if (mode == CacheMode::replay_only && config_.cache_dir.empty())
        throw ConfigError("replay mode needs a cache directory");
}

std::string Gateway::request_hash(const ChatRequest& r) {
    Json key{{"model", r.model},
             {"system", r.system},
             {"user_turns", r.user_turns},
             {"temperature", r.temperature},
             {"max_output_tokens", r.max_output_tokens},
             {"salt", r.salt}};
    return sha256_hex(key.dump());
}

std::optional<Json> Gateway::cache_get(const std::string& key) const {
    if (mode_ == CacheMode::off) return std::nullopt;
    auto path = config_.cache_dir / key.substr(0, 2) / (key + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        return Json::parse(in);
    } catch (const Json::exception&) {
        spdlog::warn("ignoring corrupt cache entry {}", path.string());
        return std::nullopt;
    }
}

void Gateway::cache_put(const std::string& key, const Json& value) const {
    if (mode_ != CacheMode::read_write) return;
    auto dir = config_.cache_dir / key.substr(0, 2);
    auto path = dir / (key + ".json");
    std::lock_guard lock(write_mutex_);
    if (std::filesystem::exists(path)) return;
    std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    write_file(tmp, value.dump());
    std::filesystem::rename(tmp, path);
}

template <class Fn>
auto Gateway::with_retries(Fn&& fn) -> decltype(fn()) {
    for (int attempt = 0;; ++attempt) {
        slots_.acquire();
        int now = ++in_flight_;
        int peak = peak_in_flight_.load();
        while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {}
        struct Release {
            Gateway* g;
            ~Release() {
                --g->in_flight_;
                g->slots_.release();
            }
        };
        try {
            Release release{this};
            return fn();
        } catch (const TransientError& e) {
            if (attempt >= config_.retry_budget)
                throw TransportError(std::string("retries exhausted: ") + e.what());
            double delay = config_.backoff_initial_seconds * std::pow(2.0, attempt);
            spdlog::warn("transient provider error ({}); retry {} in {:.2f}s", e.what(),
                         attempt + 1, delay);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
    }
}

ChatResponse Gateway::chat(const ChatRequest& request) {
    request.validate();
    const std::string key = request_hash(request);
    if (auto cached = cache_get(key)) {
        ++cache_hits_;
        return cached->get<ChatResponse>();
    }
    if (mode_ == CacheMode::replay_only)
        throw TransportError("replay cache miss for request " + key);
    ChatResponse response = with_retries([&] { return provider_->chat(request); });
    if (response.finish_reason == FinishReason::complete ||
        response.finish_reason == FinishReason::refused)
        cache_put(key, Json(response));
    return response;
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts,
                                            const std::string& model) {
    if (texts.empty()) throw ValidationError("embed called with no texts");
    std::vector<std::optional<EmbeddingVector>> slots(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_index;
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = sha256_hex(Json{{"embed_model", model}, {"text", texts[i]}}.dump());
        if (auto cached = cache_get(keys[i])) {
            ++cache_hits_;
            slots[i] = EmbeddingVector{cached->at("values").get<std::vector<double>>(), model};
        } else {
            missing.push_back(texts[i]);
            missing_index.push_back(i);
        }
    }
    if (!missing.empty()) {
        if (mode_ == CacheMode::replay_only)
            throw TransportError("replay cache miss for embedding");
        auto fresh = with_retries([&] { return provider_->embed(missing, model); });
        if (fresh.size() != missing.size())
            throw TransportError("provider returned wrong number of embeddings");
        for (std::size_t k = 0; k < fresh.size(); ++k) {
            cache_put(keys[missing_index[k]], Json{{"values", fresh[k].values}});
            slots[missing_index[k]] = std::move(fresh[k]);
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    for (const auto& v : out)
        if (v.values.size() != out.front().values.size())
            throw ExternalError("embedding dimension mismatch within batch");
    return out;
}

}  // namespace forge
