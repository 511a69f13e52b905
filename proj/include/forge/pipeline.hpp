#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/annotation_server.hpp"
#include "forge/calibration.hpp"
#include "forge/config.hpp"
#include "forge/judges.hpp"
#include "forge/llm.hpp"
#include "forge/prompts.hpp"
#include "forge/sandbox.hpp"
#include "forge/stats.hpp"
#include "forge/store.hpp"

namespace forge {

struct ForgeSettings {
    KeyValueConfig raw;
    PipelineConfig pipeline;
    int workers = 1;

    std::string input_format = "bundle";
    std::filesystem::path input_requirements;
    std::filesystem::path input_references;
    std::filesystem::path rule_pack;
    std::filesystem::path prompt_dir;

    std::string provider = "mock";
    std::filesystem::path mock_script;
    std::size_t mock_embedding_dimension = 64;
    ProviderConfig provider_config;
    CacheMode cache_mode = CacheMode::read_write;
    std::vector<std::string> perturb_models;
    std::string embedding_model;
    std::string quality_model;

    std::filesystem::path profile_dir;
    SandboxOptions sandbox;

    AnalyzerConfig analyzers;

    std::vector<Metric> judge_metrics;
    std::vector<std::string> judge_models;
    int judge_runs = 1;
    bool judge_salt_runs = false;
    double judge_temperature = 0.0;
    int judge_max_output_tokens = 2048;

    bool meta_fallback_to_target = false;

    std::string server_host = "127.0.0.1";
    int server_port = 8377;
    bool dual_annotation = false;
    int lease_seconds = 1800;
    std::filesystem::path static_dir;

    // Paths are relative to the config file; "@data/..." points into the
    // installed data directory.
    static ForgeSettings from_config(const KeyValueConfig& cfg);
    static ForgeSettings load(const std::filesystem::path& path);
};

enum class StageOutcome { ran, skipped };

class Pipeline {
public:
    // `provider` overrides the configured provider (tests).
    Pipeline(ForgeSettings settings, DatasetStore& store, std::shared_ptr<LlmProvider> provider = nullptr);
    ~Pipeline();

    // Runs one stage after checking ordering. `serve` needs serve_* below.
    StageOutcome run(std::string_view stage);

    // Annotation service over the selected programs' diagnosis reports.
    std::unique_ptr<AnnotationService> make_annotation_service(AnnotationService::Clock clock = {});
    // Checks ordering and marks the serve stage running / complete.
    bool begin_serve();
    void finish_serve();

    Gateway& gateway();
    const ForgeSettings& settings() const noexcept { return settings_; }

private:
    void ingest();
    void verify();
    void augment();
    void perturb();
    void disrupt();
    void select();
    void report();
    void judge();
    void meta();
    void stats();

    Sandbox make_sandbox() const;
    const PromptLibrary& prompts();
    const RuleSet& rules();
    void log_events(std::string_view stage, const std::vector<Json>& events);

    ForgeSettings settings_;
    DatasetStore& store_;
    std::shared_ptr<LlmProvider> provider_;
    std::unique_ptr<Gateway> gateway_;
    std::optional<PromptLibrary> prompts_;
    std::optional<RuleSet> rules_;
};

// Splits "a, b ,c" into trimmed non-empty items.
std::vector<std::string> split_list(const std::string& text);

}  // namespace forge
