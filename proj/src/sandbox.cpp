#include "forge/sandbox.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "forge/error.hpp"
#include "forge/hashing.hpp"
#include "forge/jsonl.hpp"
#include "forge/parallel.hpp"
#include "forge/subprocess.hpp"

namespace fs = std::filesystem;

namespace forge {

namespace {

constexpr std::size_t kExcerptLimit = 4000;

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    if (from.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string tail(const std::string& text, std::size_t limit) {
    if (text.size() <= limit) return text;
    return text.substr(text.size() - limit);
}

std::string first_word(const std::string& command) {
    std::istringstream in(command);
    std::string word;
    in >> word;
    return word;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

using Snapshot = std::map<std::string, std::pair<std::uintmax_t, std::int64_t>>;

Snapshot snapshot(const std::vector<fs::path>& roots) {
    Snapshot snap;
    for (const auto& root : roots) {
        std::error_code ec;
        if (!fs::exists(root, ec)) continue;
        snap[root.string()] = {0, 0};
        for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
             it != fs::recursive_directory_iterator(); it.increment(ec)) {
            if (ec) break;
            std::uintmax_t size = it->is_regular_file(ec) ? it->file_size(ec) : 0;
            auto mtime = it->last_write_time(ec).time_since_epoch().count();
            snap[it->path().string()] = {size, static_cast<std::int64_t>(mtime)};
        }
    }
    return snap;
}

std::vector<std::string> snapshot_diff(const Snapshot& before, const Snapshot& after) {
    std::vector<std::string> changed;
    for (const auto& [path, meta] : after) {
        auto it = before.find(path);
        if (it == before.end()) changed.push_back("created " + path);
        else if (it->second != meta) changed.push_back("modified " + path);
    }
    for (const auto& [path, _] : before)
        if (!after.count(path)) changed.push_back("removed " + path);
    return changed;
}

std::uintmax_t file_size_or_zero(const fs::path& p) {
    std::error_code ec;
    auto s = fs::file_size(p, ec);
    return ec ? 0 : s;
}

}  // namespace

std::string_view to_string(TestStatus s) {
    switch (s) {
        case TestStatus::pass: return "pass";
        case TestStatus::fail: return "fail";
        case TestStatus::timeout: return "timeout";
        case TestStatus::sandbox_violation: return "sandbox_violation";
        case TestStatus::env_error: return "env_error";
    }
    return "fail";
}

namespace {

TestStatus parse_test_status(const std::string& s) {
    for (auto st : {TestStatus::pass, TestStatus::fail, TestStatus::timeout,
                    TestStatus::sandbox_violation, TestStatus::env_error})
        if (to_string(st) == s) return st;
    throw ValidationError("unknown test status '" + s + "'");
}

}  // namespace

void RunnerProfile::validate() const {
    if (run_command.empty()) throw ConfigError("runner profile without run_command");
    if (source_file.empty()) throw ConfigError("runner profile without source_file");
    if (!(cpu_time_limit > 0) || !(wall_time_limit > 0) || !(compile_time_limit > 0) ||
        memory_limit == 0)
        throw ConfigError("runner profile limits must be positive");
    if (language != Language::python && !compile_command)
        throw ConfigError("compiled language profile needs a compile_command");
}

RunnerProfile RunnerProfile::from_config(const KeyValueConfig& cfg) {
    RunnerProfile p;
    p.language = parse_language(cfg.require("language"));
    p.source_file = cfg.require("source_file");
    if (auto c = cfg.find("compile_command"); c && !c->empty()) p.compile_command = *c;
    p.run_command = cfg.require("run_command");
    p.cpu_time_limit = cfg.get_double("cpu_time_limit", p.cpu_time_limit);
    p.wall_time_limit = cfg.get_double("wall_time_limit", p.wall_time_limit);
    p.compile_time_limit = cfg.get_double("compile_time_limit", p.compile_time_limit);
    p.memory_limit = static_cast<std::size_t>(cfg.get_int("memory_limit", static_cast<long long>(p.memory_limit)));
    p.validate();
    return p;
}

RunnerProfile RunnerProfile::load(const fs::path& path) {
    return from_config(KeyValueConfig::load(path));
}

FunctionalStatus overall_status(const std::vector<TestOutcome>& outcomes) {
    bool violation = false, env = false, all_pass = !outcomes.empty();
    for (const auto& o : outcomes) {
        violation |= o.status == TestStatus::sandbox_violation;
        env |= o.status == TestStatus::env_error;
        all_pass &= o.status == TestStatus::pass;
    }
    if (violation) return FunctionalStatus::sandbox_violation;
    if (env) return FunctionalStatus::env_error;
    return all_pass ? FunctionalStatus::pass : FunctionalStatus::fail;
}

std::string normalize_output(std::string_view text) {
    std::string out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        auto last = line.find_last_not_of(" \t\r\f\v");
        out.append(last == std::string_view::npos ? std::string_view{} : line.substr(0, last + 1));
        out += '\n';
        start = end + 1;
    }
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::filesystem::path default_guard_library() {
#ifdef FORGE_WRITE_GUARD_PATH
    fs::path p = FORGE_WRITE_GUARD_PATH;
    if (fs::exists(p)) return p;
#endif
    return {};
}

Sandbox::Sandbox(SandboxOptions options, std::map<Language, RunnerProfile> profiles)
    : options_(std::move(options)), profiles_(std::move(profiles)) {
    if (options_.root.empty()) options_.root = fs::temp_directory_path() / "forge-sandbox";
    fs::create_directories(options_.root);
    options_.root = fs::canonical(options_.root);
    for (auto& r : options_.audit_roots) {
        std::error_code ec;
        auto c = fs::canonical(r, ec);
        if (!ec) r = c;
    }
    for (const auto& [_, p] : profiles_) p.validate();
}

const RunnerProfile& Sandbox::profile(Language language) const {
    auto it = profiles_.find(language);
    if (it == profiles_.end())
        throw ConfigError("no runner profile for language " + std::string(to_string(language)));
    return it->second;
}

fs::path Sandbox::make_workspace(const std::string& program_id) const {
    std::string name;
    for (char c : program_id)
        name += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    name += "-" + std::to_string(counter_++);
    fs::path ws = options_.root / name;
    fs::remove_all(ws);
    fs::create_directories(ws / "src");
    fs::create_directories(ws / "tmp");
    return ws;
}

TestReport Sandbox::run_tests(const Program& program, const Requirement& requirement) const {
    const auto started = std::chrono::steady_clock::now();
    TestReport report;
    report.program_id = program.id;
    auto finish = [&](FunctionalStatus overall) {
        report.overall = overall;
        report.duration =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return report;
    };

    auto pit = profiles_.find(requirement.language);
    if (pit == profiles_.end()) {
        report.detail = "no runner profile for " + std::string(to_string(requirement.language));
        return finish(FunctionalStatus::env_error);
    }
    const RunnerProfile& prof = pit->second;

    fs::path ws;
    try {
        ws = make_workspace(program.id);
        write_file(ws / "src" / prof.source_file, program.code);
    } catch (const std::exception& e) {
        report.detail = std::string("workspace creation failed: ") + e.what();
        return finish(FunctionalStatus::env_error);
    }
    struct Cleanup {
        fs::path ws;
        bool keep;
        ~Cleanup() {
            std::error_code ec;
            if (!keep) fs::remove_all(ws, ec);
        }
    } cleanup{ws, options_.keep_workspaces};

    const fs::path src = ws / "src";
    const fs::path tmp = ws / "tmp";
    const fs::path guard_log = ws / "guard.log";
    auto expand = [&](std::string cmd) {
        cmd = replace_all(cmd, "{src}", src.string());
        cmd = replace_all(cmd, "{file}", (src / prof.source_file).string());
        cmd = replace_all(cmd, "{workdir}", ws.string());
        cmd = replace_all(cmd, "{tmp}", tmp.string());
        if (!options_.isolation_wrapper.empty() && find_executable(options_.isolation_wrapper)) {
            cmd = options_.isolation_wrapper + " --ro-bind / / --dev /dev --proc /proc --bind " +
                  shell_quote(ws.string()) + " " + shell_quote(ws.string()) + " --chdir " +
                  shell_quote(src.string()) + " -- /bin/sh -c " + shell_quote(cmd);
        }
        return cmd;
    };
    std::map<std::string, std::string> env{{"HOME", tmp.string()},
                                           {"TMPDIR", tmp.string()},
                                           {"PYTHONDONTWRITEBYTECODE", "1"},
                                           {"PYTHONHASHSEED", "0"}};
    if (!options_.guard_library.empty()) {
        env["LD_PRELOAD"] = options_.guard_library.string();
        env["FORGE_GUARD_ALLOW"] = ws.string();
        env["FORGE_GUARD_LOG"] = guard_log.string();
    }
    auto scrub = [&](std::string text) { return replace_all(std::move(text), ws.string(), "<workspace>"); };
    auto violations = [&] {
        std::ifstream in(guard_log);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return all;
    };

    const Snapshot before = snapshot(options_.audit_roots);
    auto audit = [&]() -> bool {
        auto changes = snapshot_diff(before, snapshot(options_.audit_roots));
        if (changes.empty()) return false;
        report.detail += "write audit:\n";
        for (const auto& c : changes) report.detail += "  " + c + "\n";
        return true;
    };

    if (prof.compile_command) {
        if (!find_executable(first_word(*prof.compile_command))) {
            report.detail = "toolchain not found: " + first_word(*prof.compile_command);
            return finish(FunctionalStatus::env_error);
        }
        ProcessLimits limits;
        limits.wall_seconds = prof.compile_time_limit;
        auto res = run_process(expand(*prof.compile_command), src, env, "", limits);
        if (file_size_or_zero(guard_log) > 0 || audit()) {
            report.detail += "compile step wrote outside the workspace:\n" + violations();
            return finish(FunctionalStatus::sandbox_violation);
        }
        if (res.timed_out) {
            report.detail = "compilation timed out";
            return finish(FunctionalStatus::timeout);
        }
        if (res.spawn_failed) {
            report.detail = "toolchain failed to start: " + scrub(res.err);
            return finish(FunctionalStatus::env_error);
        }
        if (!res.ok()) {
            report.detail = "compilation failed:\n" + tail(scrub(res.err + res.out), kExcerptLimit);
            for (const auto& t : requirement.tests)
                report.per_test.push_back({t.id, TestStatus::fail, "", tail(scrub(res.err), kExcerptLimit),
                                           std::nullopt});
            return finish(FunctionalStatus::fail);
        }
    }
    if (!find_executable(first_word(prof.run_command)) &&
        first_word(prof.run_command).find('{') == std::string::npos) {
        report.detail = "runtime not found: " + first_word(prof.run_command);
        return finish(FunctionalStatus::env_error);
    }

    for (const auto& test : requirement.tests) {
        TestOutcome outcome;
        outcome.test_id = test.id;
        ProcessLimits limits;
        limits.wall_seconds = test.timeout;
        limits.cpu_seconds = prof.cpu_time_limit;
        limits.memory_bytes = prof.memory_limit;
        const auto log_before = file_size_or_zero(guard_log);
        ProcessResult res;
        if (test.mode == TestMode::stdin_stdout)
            res = run_process(expand(prof.run_command), src, env, test.input, limits);
        else
            res = run_process(expand(test.command), src, env, "", limits);
        const std::string normalized = normalize_output(res.out);
        outcome.stdout_digest = sha256_hex(normalized).substr(0, 16);
        outcome.stderr_excerpt = tail(scrub(res.err), kExcerptLimit);
        if (file_size_or_zero(guard_log) > log_before) {
            outcome.status = TestStatus::sandbox_violation;
        } else if (res.timed_out) {
            outcome.status = TestStatus::timeout;
        } else if (res.spawn_failed) {
            outcome.status = TestStatus::env_error;
        } else if (test.mode == TestMode::stdin_stdout) {
            bool same = options_.comparison == OutputComparison::exact
                            ? res.out == test.expected_output
                            : normalized == normalize_output(test.expected_output);
            outcome.status = res.ok() && same ? TestStatus::pass : TestStatus::fail;
        } else {
            outcome.status = res.ok() ? TestStatus::pass : TestStatus::fail;
        }
        if (!res.ok() && !res.err.empty()) outcome.exception_trace = outcome.stderr_excerpt;
        report.per_test.push_back(std::move(outcome));
    }

    const bool audited = audit();
    if (file_size_or_zero(guard_log) > 0) report.detail += "blocked writes:\n" + violations();
    if (audited) return finish(FunctionalStatus::sandbox_violation);
    return finish(overall_status(report.per_test));
}

VerifiedReferences verify_references(const std::vector<Requirement>& requirements,
                                     const std::vector<Program>& references,
                                     const Sandbox& sandbox, int workers) {
    std::map<std::string, const Requirement*> by_id;
    for (const auto& r : requirements) by_id[r.id] = &r;
    std::vector<TestReport> reports(references.size());
    parallel_for(references.size(), workers, [&](std::size_t i) {
        const auto& p = references[i];
        auto it = by_id.find(p.requirement_id);
        if (it == by_id.end()) {
            reports[i].program_id = p.id;
            reports[i].overall = FunctionalStatus::env_error;
            reports[i].detail = "unknown requirement " + p.requirement_id;
            return;
        }
        reports[i] = sandbox.run_tests(p, *it->second);
    });

    VerifiedReferences out;
    std::map<std::string, std::vector<std::size_t>> per_req;
    for (std::size_t i = 0; i < references.size(); ++i)
        per_req[references[i].requirement_id].push_back(i);
    for (const auto& req : requirements) {
        const auto& idx = per_req[req.id];
        bool violated = false;
        std::vector<std::size_t> passing;
        for (auto i : idx) {
            if (reports[i].overall == FunctionalStatus::sandbox_violation) violated = true;
            if (reports[i].overall == FunctionalStatus::pass) passing.push_back(i);
            else
                out.log.push_back({{"event", "reference_dropped"},
                                   {"program_id", references[i].id},
                                   {"requirement_id", req.id},
                                   {"status", reports[i].overall},
                                   {"detail", reports[i].detail}});
        }
        if (violated || passing.empty()) {
            out.log.push_back({{"event", "requirement_dropped"},
                               {"requirement_id", req.id},
                               {"reason", violated ? "reference violated the sandbox"
                                                   : "no passing reference program"}});
            continue;
        }
        Requirement kept = req;
        kept.reference_program_ids.clear();
        for (auto i : passing) {
            Program p = references[i];
            p.functional_status = FunctionalStatus::pass;
            kept.reference_program_ids.push_back(p.id);
            out.references.push_back(std::move(p));
            out.reports.push_back(reports[i]);
        }
        out.requirements.push_back(std::move(kept));
    }
    return out;
}

void to_json(Json& j, const TestReport& r) {
    Json tests = Json::array();
    for (const auto& t : r.per_test) {
        Json jt{{"test_id", t.test_id},
                {"status", to_string(t.status)},
                {"stdout_digest", t.stdout_digest},
                {"stderr_excerpt", t.stderr_excerpt}};
        jt["exception_trace"] = t.exception_trace ? Json(*t.exception_trace) : Json(nullptr);
        tests.push_back(std::move(jt));
    }
    j = Json{{"program_id", r.program_id}, {"overall", r.overall}, {"per_test", tests},
             {"detail", r.detail}};
}

void from_json(const Json& j, TestReport& r) {
    j.at("program_id").get_to(r.program_id);
    j.at("overall").get_to(r.overall);
    r.detail = j.value("detail", "");
    r.per_test.clear();
    for (const auto& jt : j.value("per_test", Json::array())) {
        TestOutcome t;
        jt.at("test_id").get_to(t.test_id);
        t.status = parse_test_status(jt.at("status").get<std::string>());
        t.stdout_digest = jt.value("stdout_digest", "");
        t.stderr_excerpt = jt.value("stderr_excerpt", "");
        if (jt.contains("exception_trace") && !jt["exception_trace"].is_null())
            t.exception_trace = jt["exception_trace"].get<std::string>();
        r.per_test.push_back(std::move(t));
    }
}

}  // namespace forge
