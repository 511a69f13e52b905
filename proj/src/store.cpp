#include "forge/store.hpp"

#include <fstream>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/hashing.hpp"

namespace forge {

namespace fs = std::filesystem;

std::string_view predecessor_of(std::string_view stage) {
    check_stage_name(stage);
    if (stage == "ingest" || stage == "stats") return {};
    if (stage == "judge") return "select";
    if (stage == "meta") return "judge";
    for (std::size_t i = 1; i < kStages.size(); ++i)
        if (kStages[i] == stage) return kStages[i - 1];
    return {};
}

void check_stage_name(std::string_view stage) {
    for (auto s : kStages)
        if (s == stage) return;
    throw ValidationError(fmt::format("unknown stage '{}'", stage));
}

DatasetStore::DatasetStore(fs::path root) : root_(std::move(root)) {}

DatasetStore::DatasetStore(DatasetStore&& other) noexcept
    : root_(std::move(other.root_)), manifest_(std::move(other.manifest_)) {}

DatasetStore DatasetStore::open(const fs::path& root, bool create) {
    if (!fs::exists(root)) {
        if (!create) throw ValidationError("store not found: " + root.string());
        fs::create_directories(root);
    }
    DatasetStore store(root);
    store.load_manifest();
    return store;
}

void DatasetStore::load_manifest() {
    const fs::path mpath = root_ / "manifest.json";
    if (!fs::exists(mpath)) {
        manifest_ = Json{{"format", 1},
                         {"tool_versions", {{"forge", kToolVersion}}},
                         {"rng_seed", nullptr},
                         {"config", Json::object()},
                         {"stages", Json::object()},
                         {"files", Json::object()}};
        save_manifest();
        return;
    }
    try {
        manifest_ = Json::parse(read_file(mpath));
    } catch (const Json::exception& e) {
        throw ValidationError(fmt::format("corrupt manifest {}: {}", mpath.string(), e.what()));
    }
    for (const auto& [file, digest] : manifest_.at("files").items()) {
        const fs::path p = root_ / file;
        const std::string actual = fs::exists(p) ? sha256_hex(read_file(p)) : std::string("missing");
        if (actual != digest.get<std::string>())
            throw ValidationError(fmt::format("store file {} does not match its manifest digest", file));
    }
}

void DatasetStore::save_manifest() {
    const fs::path tmp = root_ / "manifest.json.tmp";
    write_file(tmp, manifest_.dump(2) + "\n");
    fs::rename(tmp, root_ / "manifest.json");
}

void DatasetStore::refresh_digest(std::string_view file) {
    manifest_["files"][std::string(file)] = sha256_hex(read_file(path(file)));
}

bool DatasetStore::stage_complete(std::string_view stage) const {
    std::lock_guard lock(mutex_);
    const auto& stages = manifest_.at("stages");
    auto it = stages.find(std::string(stage));
    return it != stages.end() && it->value("status", "") == "complete";
}

bool DatasetStore::stage_started(std::string_view stage) const {
    std::lock_guard lock(mutex_);
    return manifest_.at("stages").contains(std::string(stage));
}

void DatasetStore::require_ready(std::string_view stage) const {
    auto pred = predecessor_of(stage);
    if (!pred.empty() && !stage_complete(pred))
        throw OrderingError(fmt::format("stage '{}' requires '{}' to complete first", stage, pred));
}

void DatasetStore::begin_stage(std::string_view stage, bool resumable) {
    std::lock_guard lock(mutex_);
    auto& stages = manifest_["stages"];
    const std::string name(stage);
    if (stages.contains(name) && !resumable) {
        // roll back the partial output of the interrupted attempt
        for (const auto& [file, size] : stages[name]["offsets"].items()) {
            const fs::path p = path(file);
            const auto keep = size.get<std::uintmax_t>();
            if (keep == 0) {
                fs::remove(p);
                manifest_["files"].erase(file);
            } else if (fs::exists(p)) {
                fs::resize_file(p, keep);
                refresh_digest(file);
            }
        }
        std::vector<std::string> created;
        for (const auto& [file, _] : manifest_["files"].items())
            if (!stages[name]["offsets"].contains(file)) created.push_back(file);
        for (const auto& file : created) {
            fs::remove(path(file));
            manifest_["files"].erase(file);
        }
    }
    if (!stages.contains(name) || !resumable) {
        Json offsets = Json::object();
        for (const auto& [file, _] : manifest_["files"].items()) offsets[file] = fs::file_size(path(file));
        stages[name] = Json{{"status", "running"}, {"offsets", offsets}};
    }
    save_manifest();
}

void DatasetStore::complete_stage(std::string_view stage) {
    std::lock_guard lock(mutex_);
    manifest_["stages"][std::string(stage)]["status"] = "complete";
    save_manifest();
}

void DatasetStore::set_run_info(const Json& config_snapshot, std::uint64_t seed) {
    std::lock_guard lock(mutex_);
    manifest_["config"] = config_snapshot;
    manifest_["rng_seed"] = seed;
    save_manifest();
}

void DatasetStore::append(std::string_view file, const Json& record) { append_all(file, {record}); }

void DatasetStore::append_all(std::string_view file, const std::vector<Json>& records) {
    std::lock_guard lock(mutex_);
    {
        std::ofstream out(path(file), std::ios::app | std::ios::binary);
        if (!out) throw Error("cannot append to " + path(file).string());
        for (const auto& r : records) out << to_jsonl_line(r) << '\n';
    }
    refresh_digest(file);
    save_manifest();
}

void DatasetStore::write(std::string_view file, std::string_view content) {
    std::lock_guard lock(mutex_);
    write_file(path(file), content);
    refresh_digest(file);
    save_manifest();
}

std::vector<Json> DatasetStore::read_records(std::string_view file) const {
    std::vector<Json> out;
    if (!exists(file)) return out;
    for_each_jsonl(path(file), [&](const Json& j, std::size_t) { out.push_back(j); });
    return out;
}

}  // namespace forge
