#include "forge/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/benchmark.hpp"
#include "forge/disruption.hpp"
#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/perturbation.hpp"
#include "forge/scoring.hpp"
#include "forge/selection.hpp"

namespace forge {

namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto b = cur.find_first_not_of(" \t");
        auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') flush();
        else cur += c;
    }
    flush();
    return out;
}

namespace {

CacheMode parse_cache_mode(const std::string& s) {
    if (s == "off") return CacheMode::off;
    if (s == "read_write") return CacheMode::read_write;
    if (s == "replay_only") return CacheMode::replay_only;
    throw ConfigError("llm.cache must be off, read_write or replay_only, got '" + s + "'");
}

}  // namespace

ForgeSettings ForgeSettings::from_config(const KeyValueConfig& cfg) {
    ForgeSettings s;
    s.raw = cfg;
    const fs::path base = cfg.origin_dir();
    auto resolve = [&](const std::string& key, const std::string& fallback = {}) -> fs::path {
        std::string v = cfg.get(key, fallback);
        if (v.empty()) return {};
        if (v.rfind("@data/", 0) == 0) return default_data_dir() / v.substr(6);
        fs::path p(v);
        return p.is_absolute() ? p : base / p;
    };

    auto& pc = s.pipeline;
    pc.programs_per_score = static_cast<int>(cfg.get_int("pipeline.programs_per_score", pc.programs_per_score));
    pc.candidates_per_group = static_cast<int>(cfg.get_int("pipeline.candidates_per_group", pc.candidates_per_group));
    pc.max_steps_exemplar = static_cast<int>(cfg.get_int("pipeline.max_steps_exemplar", pc.max_steps_exemplar));
    pc.max_steps_deteriorate = static_cast<int>(cfg.get_int("pipeline.max_steps_deteriorate", pc.max_steps_deteriorate));
    pc.softmax_temperature = cfg.get_double("pipeline.softmax_temperature", pc.softmax_temperature);
    pc.sampling_temperature = cfg.get_double("pipeline.sampling_temperature", pc.sampling_temperature);
    pc.max_output_tokens = static_cast<int>(cfg.get_int("pipeline.max_output_tokens", pc.max_output_tokens));
    pc.rng_seed = static_cast<std::uint64_t>(cfg.get_int("pipeline.seed", 0));
    pc.attempts_per_quota = static_cast<int>(cfg.get_int("pipeline.attempts_per_quota", pc.attempts_per_quota));
    pc.references_count_toward_quota =
        cfg.get_bool("pipeline.references_count_toward_quota", pc.references_count_toward_quota);
    pc.validate();
    s.workers = static_cast<int>(cfg.get_int("pipeline.workers", 1));
    if (s.workers < 1) throw ConfigError("pipeline.workers must be >= 1");

    s.input_format = cfg.get("input.format", "bundle");
    s.input_requirements = resolve("input.requirements", "requirements.jsonl");
    s.input_references = resolve("input.references", "references.jsonl");
    s.rule_pack = resolve("rules.pack", "@data/rules/starter.jsonl");
    s.prompt_dir = resolve("prompts.dir", "@data/prompts");

    s.provider = cfg.get("llm.provider", "mock");
    s.mock_script = resolve("llm.mock_script");
    s.mock_embedding_dimension = static_cast<std::size_t>(cfg.get_int("llm.embedding_dimension", 64));
    s.provider_config.endpoint = cfg.get("llm.endpoint", "");
    s.provider_config.credential_env = cfg.get("llm.credential_env", "FORGE_API_KEY");
    s.provider_config.max_concurrent = static_cast<int>(cfg.get_int("llm.max_concurrent", 4));
    s.provider_config.retry_budget = static_cast<int>(cfg.get_int("llm.retry_budget", 3));
    s.provider_config.backoff_initial_seconds = cfg.get_double("llm.backoff_initial_seconds", 1.0);
    s.provider_config.cache_dir = resolve("llm.cache_dir");
    s.provider_config.validate();
    s.cache_mode = parse_cache_mode(cfg.get("llm.cache", "read_write"));
    s.perturb_models = split_list(cfg.get("llm.perturb_models", ""));
    s.embedding_model = cfg.get("llm.embedding_model", "");
    s.quality_model = cfg.get("llm.quality_model", "");

    s.profile_dir = resolve("sandbox.profiles", "@data/profiles");
    s.sandbox.root = resolve("sandbox.root");
    for (const auto& a : split_list(cfg.get("sandbox.audit", ""))) {
        fs::path p(a);
        s.sandbox.audit_roots.push_back(p.is_absolute() ? p : base / p);
    }
    if (cfg.get_bool("sandbox.write_guard", true)) s.sandbox.guard_library = default_guard_library();
    s.sandbox.keep_workspaces = cfg.get_bool("sandbox.keep_workspaces", false);
    s.sandbox.isolation_wrapper = cfg.get("sandbox.isolation_wrapper", "");
    const std::string cmp = cfg.get("sandbox.comparison", "trailing_whitespace");
    if (cmp == "exact") s.sandbox.comparison = OutputComparison::exact;
    else if (cmp != "trailing_whitespace") throw ConfigError("sandbox.comparison must be trailing_whitespace or exact");

    for (auto lang : {Language::python, Language::cpp, Language::java})
        if (auto c = cfg.find("analyzer." + std::string(to_string(lang)))) s.analyzers.commands[lang] = *c;
    s.analyzers.timeout_seconds = cfg.get_double("analyzer.timeout", 60.0);

    for (const auto& m : split_list(cfg.get("judge.metrics", "ice, codejudge, chrfpp, codebleu, editsim")))
        s.judge_metrics.push_back(parse_metric(m));
    s.judge_models = split_list(cfg.get("judge.models", ""));
    s.judge_runs = static_cast<int>(cfg.get_int("judge.runs", 1));
    if (s.judge_runs < 1) throw ConfigError("judge.runs must be >= 1");
    s.judge_salt_runs = cfg.get_bool("judge.salt_runs", false);
    s.judge_temperature = cfg.get_double("judge.temperature", 0.0);
    s.judge_max_output_tokens = static_cast<int>(cfg.get_int("judge.max_output_tokens", 2048));

    s.meta_fallback_to_target = cfg.get_bool("meta.fallback_to_target", false);

    s.server_host = cfg.get("server.host", s.server_host);
    s.server_port = static_cast<int>(cfg.get_int("server.port", s.server_port));
    s.dual_annotation = cfg.get_bool("server.dual_annotation", false);
    s.lease_seconds = static_cast<int>(cfg.get_int("server.lease_seconds", s.lease_seconds));
    s.static_dir = resolve("server.static_dir");
    return s;
}

ForgeSettings ForgeSettings::load(const fs::path& path) { return from_config(KeyValueConfig::load(path)); }

Pipeline::Pipeline(ForgeSettings settings, DatasetStore& store, std::shared_ptr<LlmProvider> provider)
    : settings_(std::move(settings)), store_(store), provider_(std::move(provider)) {
    if (settings_.provider_config.cache_dir.empty() && settings_.cache_mode != CacheMode::off)
        settings_.provider_config.cache_dir = store_.root() / "cache";
}

Pipeline::~Pipeline() = default;

Gateway& Pipeline::gateway() {
    if (!gateway_) {
        if (!provider_) {
            if (settings_.provider == "mock") {
                if (settings_.mock_script.empty()) throw ConfigError("llm.mock_script is required for the mock provider");
                auto mock = MockProvider::from_file(settings_.mock_script);
                mock->set_embedding_dimension(settings_.mock_embedding_dimension);
                provider_ = mock;
            } else if (settings_.provider == "http") {
                provider_ = std::make_shared<HttpProvider>(settings_.provider_config);
            } else {
                throw ConfigError("llm.provider must be mock or http, got '" + settings_.provider + "'");
            }
        }
        gateway_ = std::make_unique<Gateway>(provider_, settings_.provider_config, settings_.cache_mode);
    }
    return *gateway_;
}

const PromptLibrary& Pipeline::prompts() {
    if (!prompts_) prompts_ = PromptLibrary::load(settings_.prompt_dir);
    return *prompts_;
}

const RuleSet& Pipeline::rules() {
    if (!rules_) rules_ = load_rule_pack(settings_.rule_pack);
    return *rules_;
}

Sandbox Pipeline::make_sandbox() const {
    std::map<Language, RunnerProfile> profiles;
    if (!fs::is_directory(settings_.profile_dir))
        throw ConfigError("runner profile directory not found: " + settings_.profile_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(settings_.profile_dir))
        if (e.path().extension() == ".conf") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        auto p = RunnerProfile::load(f);
        profiles[p.language] = p;
    }
    return Sandbox(settings_.sandbox, profiles);
}

void Pipeline::log_events(std::string_view stage, const std::vector<Json>& events) {
    if (events.empty()) return;
    std::vector<Json> tagged;
    for (auto e : events) {
        e["stage"] = stage;
        tagged.push_back(std::move(e));
    }
    store_.append_all("log.jsonl", tagged);
}

StageOutcome Pipeline::run(std::string_view stage) {
    check_stage_name(stage);
    if (stage == "serve") throw ValidationError("the serve stage runs as a service (forge serve)");
    if (store_.stage_complete(stage)) {
        spdlog::info("{}: skipped (already complete)", stage);
        return StageOutcome::skipped;
    }
    store_.require_ready(stage);
    store_.begin_stage(stage, stage == "judge");
    spdlog::info("{}: running", stage);
    if (stage == "ingest") ingest();
    else if (stage == "verify") verify();
    else if (stage == "augment") augment();
    else if (stage == "perturb") perturb();
    else if (stage == "disrupt") disrupt();
    else if (stage == "select") select();
    else if (stage == "report") report();
    else if (stage == "judge") judge();
    else if (stage == "meta") meta();
    else if (stage == "stats") stats();
    store_.complete_stage(stage);
    spdlog::info("{}: complete", stage);
    return StageOutcome::ran;
}

namespace {

// Converter stubs: the source datasets are not redistributed, so each entry
// only documents how its records map onto a requirement bundle.
const std::map<std::string, std::string, std::less<>> kConverterNotes{
    {"bigcodebench", "one requirement per task (instruct prompt as statement, language python); the "
                     "unittest class becomes a harness-command test; canonical_solution is the reference"},
    {"livecodebench", "one requirement per problem; public and private test cases become stdin-stdout "
                      "tests; a passing submission is the reference"},
    {"apps", "one requirement per problem; input_output pairs become stdin-stdout tests; each entry of "
             "solutions is a reference"},
    {"aider_polyglot", "one requirement per exercise and language (python, cpp or java); the exercise "
                       "test suite becomes a harness-command test; the example solution is the reference"},
};

}  // namespace

void Pipeline::ingest() {
    if (settings_.input_format != "bundle") {
        auto note = kConverterNotes.find(settings_.input_format);
        if (note == kConverterNotes.end())
            throw ConfigError(fmt::format("unknown input format '{}' (expected bundle, bigcodebench, livecodebench, "
                                          "apps or aider_polyglot)",
                                          settings_.input_format));
        throw ConfigError(fmt::format(
            "no built-in converter for '{}': {}. Write requirements.jsonl + references.jsonl in that shape "
            "and set input.format = bundle",
            note->first, note->second));
    }
    auto requirements = read_jsonl<Requirement>(settings_.input_requirements);
    auto references = read_jsonl<Program>(settings_.input_references);
    std::set<std::string> req_ids, prog_ids;
    std::map<std::string, std::vector<std::string>> refs_of;
    for (auto& r : requirements) {
        r.validate();
        if (!req_ids.insert(r.id).second) throw ValidationError("duplicate requirement id " + r.id);
    }
    for (auto& p : references) {
        p.validate();
        if (p.origin != Origin::reference) throw ValidationError("ingested program " + p.id + " is not a reference");
        if (!prog_ids.insert(p.id).second) throw ValidationError("duplicate program id " + p.id);
        if (!req_ids.count(p.requirement_id))
            throw ValidationError("reference " + p.id + " names unknown requirement " + p.requirement_id);
        refs_of[p.requirement_id].push_back(p.id);
    }
    for (auto& r : requirements) {
        if (r.reference_program_ids.empty()) r.reference_program_ids = refs_of[r.id];
        std::set<std::string> listed(r.reference_program_ids.begin(), r.reference_program_ids.end());
        std::set<std::string> actual(refs_of[r.id].begin(), refs_of[r.id].end());
        if (listed != actual)
            throw ValidationError("requirement " + r.id + " lists reference ids that do not match the bundle");
    }
    Json snapshot = Json::object();
    for (const auto& [k, v] : settings_.raw.values()) snapshot[k] = v;
    store_.set_run_info(snapshot, settings_.pipeline.rng_seed);
    store_.append_items("raw_requirements.jsonl", requirements);
    store_.append_items("raw_references.jsonl", references);
    spdlog::info("ingest: {} requirements, {} reference programs", requirements.size(), references.size());
}

void Pipeline::verify() {
    auto requirements = store_.read<Requirement>("raw_requirements.jsonl");
    auto references = store_.read<Program>("raw_references.jsonl");
    Sandbox sandbox = make_sandbox();
    auto verified = verify_references(requirements, references, sandbox, settings_.workers);
    store_.append_items("requirements.jsonl", verified.requirements);
    store_.append_items("programs.jsonl", verified.references);
    store_.append_items("reports.jsonl", verified.reports);
    log_events("verify", verified.log);
    spdlog::info("verify: kept {}/{} requirements, {}/{} references", verified.requirements.size(),
                 requirements.size(), verified.references.size(), references.size());
}

namespace {

PerturbationContext perturbation_context(Gateway& gateway, const PromptLibrary& prompts, const ForgeSettings& s) {
    PerturbationContext ctx;
    ctx.gateway = &gateway;
    ctx.prompts = &prompts;
    ctx.models = s.perturb_models;
    ctx.temperature = s.pipeline.sampling_temperature;
    ctx.max_output_tokens = s.pipeline.max_output_tokens;
    if (ctx.models.empty()) throw ConfigError("llm.perturb_models is empty");
    return ctx;
}

void collect(DatasetStore& store, std::vector<BucketResult>& results, std::vector<Json>& log) {
    std::vector<Program> programs;
    std::vector<TestReport> reports;
    std::vector<PerturbationStepTrace> traces;
    for (auto& r : results) {
        programs.insert(programs.end(), r.programs.begin(), r.programs.end());
        reports.insert(reports.end(), r.reports.begin(), r.reports.end());
        traces.insert(traces.end(), r.traces.begin(), r.traces.end());
        log.insert(log.end(), r.log.begin(), r.log.end());
    }
    store.append_items("programs.jsonl", programs);
    store.append_items("reports.jsonl", reports);
    store.append_items("traces.jsonl", traces);
}

}  // namespace

void Pipeline::augment() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    Sandbox sandbox = make_sandbox();
    auto ctx = perturbation_context(gateway(), prompts(), settings_);
    const RuleSet& pack = rules();
    std::vector<BucketResult> results(requirements.size());
    parallel_for(requirements.size(), settings_.workers, [&](std::size_t i) {
        const auto& req = requirements[i];
        std::vector<Program> seeds;
        for (const auto& p : programs)
            if (p.requirement_id == req.id && p.target_score == kMaxScore) seeds.push_back(p);
        Rng rng(derive_seed(settings_.pipeline.rng_seed, "augment", req.id));
        results[i] = augment_exemplars(req, seeds, pack, settings_.pipeline, sandbox, rng, ctx);
    });
    std::vector<Json> log;
    collect(store_, results, log);
    log_events("augment", log);
}

void Pipeline::perturb() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    Sandbox sandbox = make_sandbox();
    auto ctx = perturbation_context(gateway(), prompts(), settings_);
    const RuleSet& pack = rules();
    const std::array<Score, 5> needed{1, 2, 3, 4, 5};
    pack.require_buckets(needed);

    struct Job {
        const Requirement* req;
        Score target;
    };
    std::vector<Job> jobs;
    for (const auto& r : requirements)
        for (Score t = 1; t <= 4; ++t) jobs.push_back({&r, t});
    std::vector<BucketResult> results(jobs.size());
    const int quota = settings_.pipeline.programs_per_score;
    parallel_for(jobs.size(), settings_.workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        std::vector<Program> seeds;
        for (const auto& p : programs)
            if (p.requirement_id == job.req->id && p.target_score == kMaxScore) seeds.push_back(p);
        BucketSpec spec{job.req->id, job.target, quota, settings_.pipeline.attempts_per_quota * quota};
        Rng rng(derive_seed(settings_.pipeline.rng_seed, "perturb", fmt::format("{}/{}", job.req->id, job.target)));
        results[i] = generate_bucket(spec, *job.req, seeds, pack, settings_.pipeline, sandbox, rng, ctx);
    });
    std::vector<Json> log;
    collect(store_, results, log);
    log_events("perturb", log);
}

void Pipeline::disrupt() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    if (settings_.embedding_model.empty()) throw ConfigError("llm.embedding_model is not set");
    std::vector<std::string> ids, statements;
    for (const auto& r : requirements) {
        ids.push_back(r.id);
        statements.push_back(r.statement);
    }
    auto vectors = gateway().embed(statements, settings_.embedding_model);
    auto matrix = build_distance_matrix(ids, vectors, settings_.workers);
    auto zero = make_zero_pairs(matrix, programs, settings_.pipeline.programs_per_score,
                                settings_.pipeline.softmax_temperature, settings_.pipeline.rng_seed);
    Json rows = Json::array();
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < matrix.size(); ++j)
            row.push_back(std::isfinite(matrix.at(i, j)) ? Json(matrix.at(i, j)) : Json(nullptr));
        rows.push_back(row);
    }
    store_.write("requirement_distances.json", Json{{"ids", ids}, {"d", rows}}.dump(2) + "\n");
    store_.append_items("programs.jsonl", zero);
}

void Pipeline::select() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    std::map<std::string, Requirement> reqs;
    for (const auto& r : requirements) reqs.emplace(r.id, r);
    std::map<std::string, Program> by_id;
    for (const auto& p : programs) by_id.emplace(p.id, p);
    std::map<SelectionGroup, std::vector<SelectionCandidate>> groups;
    for (const auto& p : programs) {
        SelectionGroup g{reqs.at(p.requirement_id).source, p.target_score};
        groups[g].push_back({p.id, p.code, program_language(p, by_id, reqs)});
    }
    auto selected = select_per_bucket(groups, settings_.pipeline.candidates_per_group, settings_.pipeline.rng_seed,
                                      settings_.workers);
    std::vector<Json> rows;
    for (const auto& [group, result] : selected) {
        Json row = result;
        row["group"] = group.key();
        row["source"] = group.source;
        row["target_score"] = group.target_score;
        rows.push_back(row);
    }
    store_.append_all("selections.jsonl", rows);
}

namespace {

std::vector<std::string> selected_ids(const DatasetStore& store) {
    std::vector<std::string> out;
    for (const auto& row : store.read_records("selections.jsonl"))
        for (const auto& id : row.at("selected_ids")) out.push_back(id.get<std::string>());
    return out;
}

}  // namespace

void Pipeline::report() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    auto reports = store_.read<TestReport>("reports.jsonl");
    std::map<std::string, Requirement> reqs;
    for (const auto& r : requirements) reqs.emplace(r.id, r);
    std::map<std::string, Program> by_id;
    for (const auto& p : programs) by_id.emplace(p.id, p);
    std::map<std::string, TestReport> report_of;
    for (const auto& r : reports) report_of.emplace(r.program_id, r);

    std::vector<const Program*> todo;
    for (const auto& id : selected_ids(store_)) {
        const Program& p = by_id.at(id);
        if (p.origin != Origin::disrupted) todo.push_back(&p);
    }
    QualityReporter reporter;
    if (!settings_.quality_model.empty()) {
        reporter.gateway = &gateway();
        reporter.prompts = &prompts();
        reporter.model = settings_.quality_model;
    }
    const fs::path scratch = (settings_.sandbox.root.empty() ? fs::temp_directory_path() / "forge-sandbox"
                                                             : settings_.sandbox.root) /
                             "analyze";
    fs::create_directories(scratch);
    const RuleSet& pack = rules();
    std::vector<DiagnosisReport> out(todo.size());
    parallel_for(todo.size(), settings_.workers, [&](std::size_t i) {
        const Program& p = *todo[i];
        auto rep = report_of.find(p.id);
        if (rep == report_of.end()) throw ValidationError("no execution report for " + p.id);
        out[i] = assemble_report(p, reqs.at(p.requirement_id), by_id, pack, rep->second, settings_.analyzers, reporter,
                                 scratch);
    });
    store_.append_items("diagnoses.jsonl", out);
}

std::unique_ptr<AnnotationService> Pipeline::make_annotation_service(AnnotationService::Clock clock) {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    auto diagnoses = store_.read<DiagnosisReport>("diagnoses.jsonl");
    std::map<std::string, Requirement> reqs;
    for (const auto& r : requirements) reqs.emplace(r.id, r);
    std::map<std::string, Program> by_id;
    for (const auto& p : programs) by_id.emplace(p.id, p);
    std::map<std::string, std::string> group_of;
    for (const auto& row : store_.read_records("selections.jsonl"))
        for (const auto& id : row.at("selected_ids")) group_of[id.get<std::string>()] = row.at("group").get<std::string>();
    std::vector<AnnotationTask> tasks;
    for (const auto& d : diagnoses) {
        const Program& p = by_id.at(d.program_id);
        const Requirement& r = reqs.at(p.requirement_id);
        tasks.push_back({p, r.statement, r.language, group_of[p.id], d});
    }
    return std::make_unique<AnnotationService>(store_, std::move(tasks), settings_.dual_annotation,
                                               std::chrono::seconds(settings_.lease_seconds), std::move(clock));
}

bool Pipeline::begin_serve() {
    store_.require_ready("serve");
    store_.begin_stage("serve", true);
    return true;
}

void Pipeline::finish_serve() { store_.complete_stage("serve"); }

void Pipeline::judge() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    std::map<std::string, Requirement> reqs;
    for (const auto& r : requirements) reqs.emplace(r.id, r);
    std::map<std::string, Program> by_id;
    for (const auto& p : programs) by_id.emplace(p.id, p);

    std::vector<JudgeSample> samples;
    for (const auto& id : selected_ids(store_)) {
        const Program& p = by_id.at(id);
        const Requirement& r = reqs.at(p.requirement_id);
        if (r.reference_program_ids.empty()) throw ValidationError("requirement " + r.id + " has no reference");
        samples.push_back({&p, &r, by_id.at(r.reference_program_ids.front()).code});
    }
    std::set<JudgmentKey> done;
    for (const auto& j : store_.read<Judgment>("judgments.jsonl")) done.insert(key_of(j));
    for (const auto& e : store_.read_records("judge_errors.jsonl"))
        done.insert({e.at("program_id"), e.at("metric"), e.at("model"), e.at("run")});

    JudgeContext ctx;
    const bool any_llm = std::any_of(settings_.judge_metrics.begin(), settings_.judge_metrics.end(), is_llm_metric);
    if (any_llm) {
        ctx.gateway = &gateway();
        ctx.prompts = &prompts();
        ctx.criteria = prompts().get("criteria");
    }
    ctx.temperature = settings_.judge_temperature;
    ctx.max_output_tokens = settings_.judge_max_output_tokens;
    for (Metric metric : settings_.judge_metrics) {
        MatrixOptions options;
        options.metrics = {metric};
        options.models = settings_.judge_models;
        options.runs = settings_.judge_runs;
        options.salt_runs = settings_.judge_salt_runs;
        options.workers = settings_.workers;
        auto result = run_judging_matrix(samples, options, ctx, done);
        store_.append_items("judgments.jsonl", result.judgments);
        std::vector<Json> errors;
        for (const auto& f : result.failures)
            errors.push_back(Json{{"program_id", std::get<0>(f.key)},
                                  {"metric", std::get<1>(f.key)},
                                  {"model", std::get<2>(f.key)},
                                  {"run", std::get<3>(f.key)},
                                  {"error", f.message}});
        if (!errors.empty()) store_.append_all("judge_errors.jsonl", errors);
        spdlog::info("judge: {} new {} judgments, {} skipped, {} failed", result.judgments.size(), to_string(metric),
                     result.skipped, result.failures.size());
    }
}

void Pipeline::meta() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    auto annotations = store_.read<AnnotationRecord>("annotations.jsonl");
    auto judgments = store_.read<Judgment>("judgments.jsonl");
    std::map<std::string, Requirement> reqs;
    for (const auto& r : requirements) reqs.emplace(r.id, r);
    std::map<std::string, Program> by_id;
    for (const auto& p : programs) by_id.emplace(p.id, p);

    const auto ids = selected_ids(store_);
    const std::set<std::string> selected(ids.begin(), ids.end());
    std::vector<Program> benchmark;
    for (const auto& p : programs)
        if (selected.count(p.id)) benchmark.push_back(p);
    auto truth = ground_truth_scores(benchmark, annotations, settings_.meta_fallback_to_target);
    std::map<std::string, std::string> group_of;
    for (const auto& p : benchmark) group_of[p.id] = std::string(to_string(reqs.at(p.requirement_id).language));

    auto reports = build_meta_report(judgments, truth, group_of);
    Json doc{{"ground_truth_samples", truth.size()}, {"metrics", reports}};
    std::string text = format_meta_tables(reports);
    std::set<std::string> annotators;
    for (const auto& a : annotations) annotators.insert(a.annotator_id);
    if (annotators.size() >= 2) {
        try {
            auto ir = interrater_summary(annotations);
            doc["interrater"] = Json{{"alpha", ir.alpha},
                                     {"icc_2_1", ir.icc_2_1},
                                     {"exact_match_pct", ir.exact_match_pct},
                                     {"shared_items", ir.shared_items}};
            text += fmt::format("\n# inter-rater\nalpha {:.2f}  ICC(2,1) {:.2f}  EM {:.2f}%  (n={})\n",
                                100 * ir.alpha.value, 100 * ir.icc_2_1.value, ir.exact_match_pct, ir.shared_items);
        } catch (const Error& e) {
            doc["interrater"] = Json{{"error", e.what()}};
        }
    }
    store_.write("meta.json", doc.dump(2) + "\n");
    store_.write("meta.txt", text);
}

void Pipeline::stats() {
    auto requirements = store_.read<Requirement>("requirements.jsonl");
    auto programs = store_.read<Program>("programs.jsonl");
    auto annotations = store_.read<AnnotationRecord>("annotations.jsonl");
    const auto ids = selected_ids(store_);
    const std::set<std::string> selected(ids.begin(), ids.end());
    auto truth = ground_truth_scores(programs, annotations, false);
    auto s = compute_benchmark_stats(programs, requirements, selected, truth);
    store_.write("stats.json", Json(s).dump(2) + "\n");
    store_.write("stats.txt", format_benchmark_table(s));
}

}  // namespace forge
