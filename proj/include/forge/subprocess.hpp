#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace forge {

struct ProcessLimits {
    double wall_seconds = 10.0;
    double cpu_seconds = 0.0;       // 0 = unlimited
    std::size_t memory_bytes = 0;   // address space; 0 = unlimited
    std::size_t output_cap = 16u << 20;
};

struct ProcessResult {
    int exit_code = -1;
    int term_signal = 0;
    bool timed_out = false;
    bool spawn_failed = false;
    std::string out;
    std::string err;
    double seconds = 0.0;

    bool ok() const noexcept { return !timed_out && !spawn_failed && term_signal == 0 && exit_code == 0; }
};

// Runs `command` through /bin/sh -c in its own process group. `env` entries
// are added to (and override) the inherited environment.
ProcessResult run_process(const std::string& command, const std::filesystem::path& cwd,
                          const std::map<std::string, std::string>& env,
                          const std::string& stdin_data, const ProcessLimits& limits);

// Looks up an executable name on PATH (or checks an explicit path).
std::optional<std::filesystem::path> find_executable(const std::string& name);

}  // namespace forge
