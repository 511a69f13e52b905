#include "forge/perturbation.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/error.hpp"
#include "forge/hashing.hpp"
#include "forge/scoring.hpp"

namespace forge {

void BucketSpec::validate() const {
    if (target_score < 1 || target_score > 5)
        throw ValidationError(fmt::format("bucket target must be in 1..5, got {}", target_score));
    if (quota < 1) throw ValidationError("bucket quota must be >= 1");
    if (max_attempts < quota) throw ValidationError("bucket max_attempts must be >= quota");
}

FunctionalStatus required_status(Score target) {
    check_score(target, "target score");
    if (target == 0) throw ValidationError("0-point programs are not generated by perturbation");
    return target >= 3 ? FunctionalStatus::pass : FunctionalStatus::fail;
}

namespace {

bool mentions_infeasible(const std::string& text) { return text.find("INFEASIBLE") != std::string::npos; }

}  // namespace

PerturbOutcome perturb_once(const std::string& code, const Requirement& requirement,
                            const PerturbationRule& rule, const std::string& model, const std::string& salt,
                            const PerturbationContext& ctx) {
    if (!ctx.gateway || !ctx.prompts) throw ConfigError("perturbation context is incomplete");
    std::string body = code;
    while (!body.empty() && body.back() == '\n') body.pop_back();
    const std::map<std::string, std::string> values{{"language", std::string(to_string(requirement.language))},
                                                    {"statement", requirement.statement},
                                                    {"rule_id", rule.id},
                                                    {"instruction", rule.instruction},
                                                    {"code", body}};
    ChatRequest req;
    req.model = model;
    req.system = ctx.prompts->render("perturb_system", values);
    req.user_turns.push_back(ctx.prompts->render("perturb_user", values));
    req.temperature = ctx.temperature;
    req.max_output_tokens = ctx.max_output_tokens;
    req.salt = salt;

    PerturbOutcome out;
    out.request_hash = Gateway::request_hash(req);
    for (int round = 0; round < 2; ++round) {
        ChatResponse resp = ctx.gateway->chat(req);
        if (resp.finish_reason == FinishReason::truncated) {
            out.kind = PerturbOutcome::Kind::step_error;
            out.message = "output truncated";
            return out;
        }
        if (resp.finish_reason == FinishReason::refused) {
            out.kind = PerturbOutcome::Kind::refused;
            out.message = "provider refused";
            return out;
        }
        if (resp.finish_reason == FinishReason::error) {
            out.kind = PerturbOutcome::Kind::step_error;
            out.message = "provider error";
            return out;
        }
        if (auto block = last_code_block(resp.text)) {
            out.kind = PerturbOutcome::Kind::perturbed;
            out.code = *block;
            return out;
        }
        if (mentions_infeasible(resp.text)) {
            out.kind = PerturbOutcome::Kind::refused;
            out.message = "rule infeasible";
            return out;
        }
        req.user_turns.push_back(ctx.prompts->render("perturb_retry", values));
    }
    out.kind = PerturbOutcome::Kind::step_error;
    out.message = "no code block after re-prompt";
    return out;
}

MultiStepResult multi_step_perturb(const Program& seed, const Requirement& requirement, Score target,
                                   const RuleSet& rules, int n_max, Rng& rng, const PerturbationContext& ctx,
                                   const std::string& program_id) {
    if (seed.target_score != kMaxScore)
        throw ValidationError("perturbation seed " + seed.id + " is not a 5-point program");
    if (n_max < 1) throw ValidationError("max perturbation steps must be >= 1");
    if (ctx.models.empty()) throw ConfigError("no perturbation models configured");

    const int steps = static_cast<int>(rng.uniform_int(1, n_max));
    const auto ceilings = sample_ceilings(target, steps, rng);
    rules.require_buckets(ceilings);

    MultiStepResult result;
    std::string code = seed.code;
    std::vector<std::string> applied;
    for (int k = 0; k < steps; ++k) {
        const auto bucket = rules.bucket(ceilings[static_cast<std::size_t>(k)]);
        const PerturbationRule& rule = rng.pick(bucket);
        const std::string& model = rng.pick(std::span<const std::string>(ctx.models));
        auto outcome = perturb_once(code, requirement, rule, model, fmt::format("{}/{}", program_id, k + 1), ctx);

        PerturbationStepTrace step;
        step.program_id = program_id;
        step.step_index = k + 1;
        step.rule_id = rule.id;
        step.model = model;
        step.request_hash = outcome.request_hash;
        step.feasible = outcome.kind == PerturbOutcome::Kind::perturbed;
        if (step.feasible) step.output_hash = sha256_hex(outcome.code);
        result.trace.push_back(step);
        if (!step.feasible) {
            spdlog::debug("{}: step {} with {} stopped: {}", program_id, k + 1, rule.id, outcome.message);
            return result;
        }
        code = std::move(outcome.code);
        applied.push_back(rule.id);
    }

    Program p;
    p.id = program_id;
    p.requirement_id = seed.requirement_id;
    p.code = std::move(code);
    p.origin = Origin::perturbed;
    p.parent_id = seed.id;
    p.rule_ids = std::move(applied);
    p.target_score = score_after_perturbation(kMaxScore, ceilings);
    result.program = std::move(p);
    return result;
}

namespace {

Json attempt_log(const std::string& id, std::string_view event, std::string_view detail) {
    return Json{{"program_id", id}, {"event", event}, {"detail", detail}};
}

}  // namespace

BucketResult augment_exemplars(const Requirement& requirement, const std::vector<Program>& seeds,
                               const RuleSet& rules, const PipelineConfig& config, const Sandbox& sandbox,
                               Rng& rng, const PerturbationContext& ctx) {
    BucketResult out;
    std::vector<Program> pool;
    for (const auto& s : seeds) {
        if (s.functional_status != FunctionalStatus::pass || s.target_score != kMaxScore)
            throw ValidationError("exemplar seed " + s.id + " is not a verified 5-point program");
        pool.push_back(s);
    }
    if (pool.empty()) throw ValidationError("requirement " + requirement.id + " has no verified seeds");

    const int quota = config.programs_per_score;
    int have = config.references_count_toward_quota ? static_cast<int>(pool.size()) : 0;
    const int max_attempts = config.attempts_per_quota * quota;
    const std::array<Score, 1> top{kMaxScore};
    rules.require_buckets(top);

    while (have < quota && out.attempts < max_attempts) {
        const int attempt = out.attempts++;
        const std::string id = fmt::format("{}-aug-{}", requirement.id, attempt);
        const Program& parent = rng.pick(std::span<const Program>(pool));
        auto step = multi_step_perturb(parent, requirement, kMaxScore, rules, config.max_steps_exemplar, rng, ctx, id);
        out.traces.insert(out.traces.end(), step.trace.begin(), step.trace.end());
        if (!step.program) {
            out.log.push_back(attempt_log(id, "refused", step.trace.back().rule_id));
            continue;
        }
        Program candidate = std::move(*step.program);
        candidate.origin = Origin::augmented;
        TestReport report = sandbox.run_tests(candidate, requirement);
        if (report.overall != FunctionalStatus::pass) {
            out.log.push_back(attempt_log(id, "discarded", to_string(report.overall)));
            continue;
        }
        candidate.functional_status = FunctionalStatus::pass;
        pool.push_back(candidate);
        out.programs.push_back(std::move(candidate));
        out.reports.push_back(std::move(report));
        ++have;
    }
    if (have < quota)
        out.log.push_back(Json{{"requirement_id", requirement.id},
                               {"event", "quota_unmet"},
                               {"target_score", kMaxScore},
                               {"have", have},
                               {"quota", quota}});
    return out;
}

BucketResult generate_bucket(const BucketSpec& spec, const Requirement& requirement,
                             const std::vector<Program>& seeds, const RuleSet& rules,
                             const PipelineConfig& config, const Sandbox& sandbox, Rng& rng,
                             const PerturbationContext& ctx) {
    spec.validate();
    if (spec.target_score == kMaxScore) throw ValidationError("deteriorative buckets target 1..4");
    if (seeds.empty()) throw ValidationError("requirement " + requirement.id + " has no 5-point seeds");
    for (const auto& s : seeds)
        if (s.target_score != kMaxScore) throw ValidationError("bucket seed " + s.id + " is not 5-point");

    BucketResult out;
    const FunctionalStatus wanted = required_status(spec.target_score);
    while (static_cast<int>(out.programs.size()) < spec.quota && out.attempts < spec.max_attempts) {
        const int attempt = out.attempts++;
        const std::string id = fmt::format("{}-s{}-{}", requirement.id, spec.target_score, attempt);
        const Program& parent = rng.pick(std::span<const Program>(seeds));
        auto step = multi_step_perturb(parent, requirement, spec.target_score, rules, config.max_steps_deteriorate,
                                       rng, ctx, id);
        out.traces.insert(out.traces.end(), step.trace.begin(), step.trace.end());
        if (!step.program) {
            out.log.push_back(attempt_log(id, "refused", step.trace.back().rule_id));
            continue;
        }
        Program candidate = std::move(*step.program);
        TestReport report = sandbox.run_tests(candidate, requirement);
        FunctionalStatus got = report.overall;
        if (got == FunctionalStatus::timeout) got = FunctionalStatus::fail;
        if (got != FunctionalStatus::pass && got != FunctionalStatus::fail) {
            out.log.push_back(attempt_log(id, "discarded", to_string(report.overall)));
            continue;
        }
        if (got != wanted) {
            out.log.push_back(attempt_log(id, "status_mismatch", to_string(got)));
            continue;
        }
        candidate.functional_status = got;
        out.programs.push_back(std::move(candidate));
        out.reports.push_back(std::move(report));
    }
    if (static_cast<int>(out.programs.size()) < spec.quota)
        out.log.push_back(Json{{"requirement_id", requirement.id},
                               {"event", "quota_unmet"},
                               {"target_score", spec.target_score},
                               {"have", out.programs.size()},
                               {"quota", spec.quota}});
    return out;
}

void to_json(Json& j, const PerturbationStepTrace& t) {
    j = Json{{"program_id", t.program_id}, {"step_index", t.step_index}, {"rule_id", t.rule_id},
             {"feasible", t.feasible},     {"model", t.model},           {"request_hash", t.request_hash},
             {"output_hash", t.output_hash}};
}

void from_json(const Json& j, PerturbationStepTrace& t) {
    j.at("program_id").get_to(t.program_id);
    j.at("step_index").get_to(t.step_index);
    j.at("rule_id").get_to(t.rule_id);
    j.at("feasible").get_to(t.feasible);
    j.at("model").get_to(t.model);
    j.at("request_hash").get_to(t.request_hash);
    j.at("output_hash").get_to(t.output_hash);
    if (t.step_index < 1) throw ValidationError("trace step_index must be >= 1");
}

}  // namespace forge
