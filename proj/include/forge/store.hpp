#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "forge/domain.hpp"
#include "forge/jsonl.hpp"

namespace forge {

inline constexpr std::array<std::string_view, 11> kStages{
    "ingest", "verify", "augment", "perturb", "disrupt", "select", "report", "serve", "judge", "meta", "stats"};

// Stage that must be complete before `stage` may run (empty for none).
std::string_view predecessor_of(std::string_view stage);
void check_stage_name(std::string_view stage);

inline constexpr std::string_view kToolVersion = "forge 0.1.0";

// Directory of append-only JSONL files plus manifest.json, which records
// stage state and a sha256 per file. Every write goes through the store so
// the digests stay current; a mismatch on open means outside tampering.
class DatasetStore {
public:
    static DatasetStore open(const std::filesystem::path& root, bool create = true);

    DatasetStore(DatasetStore&& other) noexcept;

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path path(std::string_view file) const { return root_ / file; }
    bool exists(std::string_view file) const { return std::filesystem::exists(path(file)); }

    bool stage_complete(std::string_view stage) const;
    bool stage_started(std::string_view stage) const;
    // Throws OrderingError naming the missing predecessor.
    void require_ready(std::string_view stage) const;
    // Marks the stage running. For non-resumable stages left incomplete by an
    // earlier attempt, files are truncated back to their pre-stage sizes.
    void begin_stage(std::string_view stage, bool resumable = false);
    void complete_stage(std::string_view stage);

    void set_run_info(const Json& config_snapshot, std::uint64_t seed);

    void append(std::string_view file, const Json& record);
    void append_all(std::string_view file, const std::vector<Json>& records);
    template <class T>
    void append_items(std::string_view file, const std::vector<T>& items) {
        std::vector<Json> records;
        records.reserve(items.size());
        for (const auto& item : items) records.emplace_back(item);
        append_all(file, records);
    }
    // Whole-file outputs (reports, tables).
    void write(std::string_view file, std::string_view content);

    std::vector<Json> read_records(std::string_view file) const;
    template <class T>
    std::vector<T> read(std::string_view file) const {
        if (!exists(file)) return {};
        return read_jsonl<T>(path(file));
    }

    const Json& manifest() const noexcept { return manifest_; }

private:
    explicit DatasetStore(std::filesystem::path root);
    void load_manifest();
    void save_manifest();
    void refresh_digest(std::string_view file);

    std::filesystem::path root_;
    Json manifest_;
    mutable std::mutex mutex_;
};

}  // namespace forge
