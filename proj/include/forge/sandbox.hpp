#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/config.hpp"
#include "forge/domain.hpp"

namespace forge {

// How one language is built and run. Command templates may use
// {src} (source directory), {file} (source file path), {workdir} and {tmp}.
struct RunnerProfile {
    Language language = Language::python;
    std::string source_file = "main.py";
    std::optional<std::string> compile_command;
    std::string run_command;
    double cpu_time_limit = 10.0;
    double wall_time_limit = 20.0;
    double compile_time_limit = 60.0;
    std::size_t memory_limit = std::size_t{2} << 30;

    void validate() const;
    static RunnerProfile from_config(const KeyValueConfig& cfg);
    static RunnerProfile load(const std::filesystem::path& path);
};

enum class TestStatus { pass, fail, timeout, sandbox_violation, env_error };
std::string_view to_string(TestStatus s);

struct TestOutcome {
    std::string test_id;
    TestStatus status = TestStatus::fail;
    std::string stdout_digest;
    std::string stderr_excerpt;
    std::optional<std::string> exception_trace;
};

struct TestReport {
    std::string program_id;
    FunctionalStatus overall = FunctionalStatus::untested;
    std::vector<TestOutcome> per_test;
    std::string detail;     // compile log, violation list, missing toolchain...
    double duration = 0.0;  // seconds; not serialized (kept out of stores)
};

// Folds per-test statuses into an overall status: any sandbox violation
// dominates, then environment errors, then pass iff every test passed,
// otherwise fail (per-test timeouts count as failures).
FunctionalStatus overall_status(const std::vector<TestOutcome>& outcomes);

enum class OutputComparison { trailing_whitespace, exact };

struct SandboxOptions {
    std::filesystem::path root;       // workspaces are created below
    std::filesystem::path guard_library;  // LD_PRELOAD write guard; empty disables
    std::vector<std::filesystem::path> audit_roots;  // snapshotted before/after each run
    OutputComparison comparison = OutputComparison::trailing_whitespace;
    bool keep_workspaces = false;
    // Optional OS-level isolation wrapper (e.g. "bwrap"); used when found on PATH.
    std::string isolation_wrapper;
};

class Sandbox {
public:
    Sandbox(SandboxOptions options, std::map<Language, RunnerProfile> profiles);

    TestReport run_tests(const Program& program, const Requirement& requirement) const;
    const RunnerProfile& profile(Language language) const;
    const SandboxOptions& options() const noexcept { return options_; }

private:
    std::filesystem::path make_workspace(const std::string& program_id) const;

    SandboxOptions options_;
    std::map<Language, RunnerProfile> profiles_;
    mutable std::atomic<std::uint64_t> counter_{0};
};

// Path of the write-guard library built alongside forge (may be empty when
// the build did not produce one).
std::filesystem::path default_guard_library();

// Trailing whitespace per line and trailing blank lines removed.
std::string normalize_output(std::string_view text);

struct VerifiedReferences {
    std::vector<Requirement> requirements;  // survivors, reference ids pruned
    std::vector<Program> references;        // passing references, status = pass
    std::vector<TestReport> reports;        // one per kept reference
    std::vector<Json> log;                  // one record per dropped item
};

// Runs every reference program; drops failing references, requirements
// without a passing reference, and whole requirements whose reference
// violated the sandbox.
VerifiedReferences verify_references(const std::vector<Requirement>& requirements,
                                     const std::vector<Program>& references,
                                     const Sandbox& sandbox, int workers = 1);

void to_json(Json& j, const TestReport& r);
void from_json(const Json& j, TestReport& r);

}  // namespace forge
