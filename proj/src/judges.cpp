#include "forge/judges.hpp"

#include <array>
#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/hashing.hpp"
#include "forge/lexer.hpp"
#include "forge/parallel.hpp"
#include "forge/similarity.hpp"

namespace forge {

namespace {

constexpr std::array<std::pair<Metric, std::string_view>, 5> kMetricNames{{{Metric::ice, "ice"},
                                                                           {Metric::codejudge, "codejudge"},
                                                                           {Metric::chrfpp, "chrfpp"},
                                                                           {Metric::codebleu, "codebleu"},
                                                                           {Metric::editsim, "editsim"}}};

}  // namespace

std::string_view to_string(Metric m) {
    for (const auto& [v, name] : kMetricNames)
        if (v == m) return name;
    return "?";
}

Metric parse_metric(std::string_view s) {
    for (const auto& [v, name] : kMetricNames)
        if (name == s) return v;
    throw ValidationError(fmt::format("unknown metric '{}' (expected ice, codejudge, chrfpp, codebleu, editsim)", s));
}

bool is_llm_metric(Metric m) { return m == Metric::ice || m == Metric::codejudge; }

void Judgment::validate() const {
    if (program_id.empty()) throw ValidationError("judgment without program id");
    if (run < 1) throw ValidationError("judgment run index must be >= 1");
    check_score(score, "judgment score");
}

std::optional<int> parse_score(std::string_view text) {
    struct Num {
        long value;
        std::size_t begin, end;
    };
    std::vector<Num> nums;
    for (std::size_t i = 0; i < text.size();) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            std::size_t j = i;
            long v = 0;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
                v = std::min(v * 10 + (text[j] - '0'), 1000000L);
                ++j;
            }
            // skip decimals such as "4.5": the fractional part is not a score
            if (j + 1 < text.size() && text[j] == '.' && std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                std::size_t k = j + 1;
                while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
                j = k;
            }
            nums.push_back({v, i, j});
            i = j;
        } else {
            ++i;
        }
    }
    if (nums.empty()) return std::nullopt;
    const Num& last = nums.back();
    if (nums.size() >= 2) {
        const Num& prev = nums[nums.size() - 2];
        std::string_view between = text.substr(prev.end, last.begin - prev.end);
        std::string trimmed;
        for (char c : between)
            if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
        if (trimmed == "/") return static_cast<int>(prev.value);
    }
    return static_cast<int>(last.value);
}

std::optional<std::vector<FaultItem>> parse_fault_report(std::string_view text) {
    auto attempt = [](std::string_view s) -> std::optional<std::vector<FaultItem>> {
        Json j = Json::parse(s, nullptr, false);
        if (j.is_discarded() || !j.is_array()) return std::nullopt;
        std::vector<FaultItem> out;
        for (const auto& item : j) {
            if (!item.is_object()) return std::nullopt;
            FaultItem f;
            for (auto [field, key] : {std::pair{&f.location, "location"}, std::pair{&f.category, "category"},
                                      std::pair{&f.severity, "severity"}, std::pair{&f.explanation, "explanation"}}) {
                auto it = item.find(key);
                if (it == item.end()) return std::nullopt;
                *field = it->is_string() ? it->get<std::string>() : it->dump();
            }
            out.push_back(std::move(f));
        }
        return out;
    };
    if (auto r = attempt(text)) return r;
    if (auto block = last_code_block(text))
        if (auto r = attempt(*block)) return r;
    auto open = text.find('['), close = text.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open)
        if (auto r = attempt(text.substr(open, close - open + 1))) return r;
    return std::nullopt;
}

namespace {

std::map<std::string, std::string> prompt_values(const Requirement& requirement, const Program& program,
                                                 const JudgeContext& ctx) {
    return {{"criteria", ctx.criteria},
            {"statement", requirement.statement},
            {"language", std::string(to_string(requirement.language))},
            {"code", program.code}};
}

ChatRequest base_request(const std::string& model, const JudgeContext& ctx, const std::string& salt) {
    if (!ctx.gateway || !ctx.prompts) throw ConfigError("judge context is incomplete");
    ChatRequest req;
    req.model = model;
    req.temperature = ctx.temperature;
    req.max_output_tokens = ctx.max_output_tokens;
    req.salt = salt;
    return req;
}

std::string complete_text(Gateway& gateway, const ChatRequest& req) {
    auto resp = gateway.chat(req);
    if (resp.finish_reason != FinishReason::complete)
        throw JudgmentError(fmt::format("judge reply not complete ({})", static_cast<int>(resp.finish_reason)));
    return resp.text;
}

// Score request with one re-prompt on a missing or out-of-range score.
std::pair<Score, std::string> scored_exchange(ChatRequest req, const JudgeContext& ctx,
                                              const std::map<std::string, std::string>& values) {
    std::string last;
    for (int round = 0; round < 2; ++round) {
        last = complete_text(*ctx.gateway, req);
        auto score = parse_score(last);
        if (score && *score >= kMinScore && *score <= kMaxScore) return {*score, last};
        req.user_turns.push_back(ctx.prompts->render("judge_retry", values));
    }
    throw JudgmentError("no score in 0..5 after re-prompt");
}

std::string digest_of(const JudgeContext& ctx, std::initializer_list<const char*> names) {
    std::string all;
    for (const char* n : names) all += ctx.prompts->digest(n);
    all += sha256_hex(ctx.criteria);
    return sha256_hex(all);
}

}  // namespace

Judgment judge_ice(const Requirement& requirement, const Program& program, const std::string& model,
                   const JudgeContext& ctx, const std::string& salt) {
    ChatRequest req = base_request(model, ctx, salt);
    const auto values = prompt_values(requirement, program, ctx);
    req.system = ctx.prompts->render("ice_system", values);
    req.user_turns.push_back(ctx.prompts->render("ice_user", values));
    auto [score, text] = scored_exchange(req, ctx, values);
    Judgment j;
    j.program_id = program.id;
    j.metric = Metric::ice;
    j.model = model;
    j.score = score;
    j.rationale = text;
    j.template_digest = digest_of(ctx, {"ice_system", "ice_user", "judge_retry"});
    return j;
}

Judgment judge_codejudge(const Requirement& requirement, const Program& program, const std::string& model,
                         const JudgeContext& ctx, const std::string& salt) {
    auto values = prompt_values(requirement, program, ctx);
    ChatRequest faults_req = base_request(model, ctx, salt);
    faults_req.system = ctx.prompts->render("codejudge_faults_system", values);
    faults_req.user_turns.push_back(ctx.prompts->render("codejudge_faults_user", values));
    std::optional<std::vector<FaultItem>> faults;
    for (int round = 0; round < 2 && !faults; ++round) {
        faults = parse_fault_report(complete_text(*ctx.gateway, faults_req));
        if (!faults) faults_req.user_turns.push_back(ctx.prompts->render("codejudge_faults_retry", values));
    }
    if (!faults) throw JudgmentError("fault report is not a valid JSON list after re-prompt");

    values["faults"] = Json(*faults).dump(2);
    ChatRequest score_req = base_request(model, ctx, salt);
    score_req.system = ctx.prompts->render("codejudge_score_system", values);
    score_req.user_turns.push_back(ctx.prompts->render("codejudge_score_user", values));
    auto [score, text] = scored_exchange(score_req, ctx, values);

    Judgment j;
    j.program_id = program.id;
    j.metric = Metric::codejudge;
    j.model = model;
    j.score = score;
    j.rationale = text;
    j.fault_report = std::move(faults);
    j.template_digest = digest_of(ctx, {"codejudge_faults_system", "codejudge_faults_user", "codejudge_faults_retry",
                                        "codejudge_score_system", "codejudge_score_user", "judge_retry"});
    return j;
}

double rule_based_raw(Metric metric, const std::string& candidate, const std::string& reference, Language language) {
    switch (metric) {
        case Metric::chrfpp:
            return chrfpp(rejoin(lex(candidate, language)), rejoin(lex(reference, language)));
        case Metric::codebleu:
            return codebleu(candidate, reference, language).total;
        case Metric::editsim:
            return edit_similarity(lex(candidate, language), lex(reference, language));
        default:
            throw ValidationError(fmt::format("{} is not a rule-based metric", to_string(metric)));
    }
}

JudgmentKey key_of(const Judgment& j) { return {j.program_id, std::string(to_string(j.metric)), j.model, j.run}; }

MatrixResult run_judging_matrix(const std::vector<JudgeSample>& samples, const MatrixOptions& options,
                                const JudgeContext& ctx, const std::set<JudgmentKey>& done) {
    if (options.runs < 1) throw ValidationError("judging runs must be >= 1");
    struct Task {
        std::size_t sample;
        Metric metric;
        std::string model;
        int run;
    };
    std::vector<Task> tasks;
    MatrixResult result;
    for (Metric metric : options.metrics) {
        std::vector<std::string> models{""};
        if (is_llm_metric(metric)) {
            if (options.models.empty()) throw ConfigError("LLM judge requested without judge models");
            models = options.models;
        }
        for (const auto& model : models)
            for (int run = 1; run <= options.runs; ++run)
                for (std::size_t s = 0; s < samples.size(); ++s) {
                    JudgmentKey key{samples[s].program->id, std::string(to_string(metric)), model, run};
                    if (done.count(key)) {
                        ++result.skipped;
                        continue;
                    }
                    tasks.push_back({s, metric, model, run});
                }
    }

    // Rule-based metrics are normalized with min/max over the whole sample set.
    std::map<Metric, std::vector<double>> raw;
    std::map<Metric, NormalizationParams> params;
    for (Metric metric : options.metrics) {
        if (is_llm_metric(metric) || samples.empty()) continue;
        auto& values = raw[metric];
        values.resize(samples.size());
        parallel_for(samples.size(), options.workers, [&](std::size_t s) {
            values[s] = rule_based_raw(metric, samples[s].program->code, samples[s].reference_code,
                                       samples[s].requirement->language);
        });
        auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        params[metric] = *hi > *lo ? NormalizationParams{*lo, *hi} : NormalizationParams{*lo, *lo + 1.0};
    }

    std::vector<std::optional<Judgment>> out(tasks.size());
    std::vector<std::string> errors(tasks.size());
    parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
        const Task& task = tasks[t];
        const JudgeSample& sample = samples[task.sample];
        try {
            Judgment j;
            if (is_llm_metric(task.metric)) {
                std::string salt = options.salt_runs ? fmt::format("run-{}", task.run) : std::string();
                j = task.metric == Metric::ice
                        ? judge_ice(*sample.requirement, *sample.program, task.model, ctx, salt)
                        : judge_codejudge(*sample.requirement, *sample.program, task.model, ctx, salt);
            } else {
                double value = raw.at(task.metric)[task.sample];
                j.program_id = sample.program->id;
                j.metric = task.metric;
                j.score = normalize_to_scale(value, params.at(task.metric));
                j.rationale = fmt::format("raw={:.6f}", value);
                j.template_digest = "";
            }
            j.run = task.run;
            out[t] = std::move(j);
        } catch (const Error& e) {
            errors[t] = e.what();
        }
    });
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (out[t]) {
            result.judgments.push_back(std::move(*out[t]));
        } else {
            const Task& task = tasks[t];
            JudgmentKey key{samples[task.sample].program->id, std::string(to_string(task.metric)), task.model, task.run};
            spdlog::warn("judgment {}/{}/{}/{} failed: {}", std::get<0>(key), std::get<1>(key), std::get<2>(key),
                         std::get<3>(key), errors[t]);
            result.failures.push_back({key, errors[t]});
        }
    }
    return result;
}

void to_json(Json& j, const FaultItem& f) {
    j = Json{{"location", f.location}, {"category", f.category}, {"severity", f.severity}, {"explanation", f.explanation}};
}

void from_json(const Json& j, FaultItem& f) {
    j.at("location").get_to(f.location);
    j.at("category").get_to(f.category);
    j.at("severity").get_to(f.severity);
    j.at("explanation").get_to(f.explanation);
}

void to_json(Json& j, const Judgment& r) {
    j = Json{{"program_id", r.program_id},
             {"metric", to_string(r.metric)},
             {"model", r.model},
             {"run", r.run},
             {"score", r.score},
             {"rationale", r.rationale},
             {"rationale_digest", sha256_hex(r.rationale)},
             {"template_digest", r.template_digest}};
    if (r.fault_report) j["fault_report"] = *r.fault_report;
}

void from_json(const Json& j, Judgment& r) {
    j.at("program_id").get_to(r.program_id);
    r.metric = parse_metric(j.at("metric").get<std::string>());
    j.at("model").get_to(r.model);
    j.at("run").get_to(r.run);
    j.at("score").get_to(r.score);
    r.rationale = j.value("rationale", std::string());
    j.at("template_digest").get_to(r.template_digest);
    r.fault_report.reset();
    if (auto it = j.find("fault_report"); it != j.end() && !it->is_null())
        r.fault_report = it->get<std::vector<FaultItem>>();
    r.validate();
}

}  // namespace forge
