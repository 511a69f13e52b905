#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace forge {

// Plain `key = value` text with optional `[section]` headers; keys inside a
// section are addressed as "section.key". '#' starts a comment line.
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> find(const std::string& key) const;

    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    // Keys under "prefix." with the prefix stripped.
    std::map<std::string, std::string> section(const std::string& prefix) const;

    std::filesystem::path origin_dir() const { return origin_dir_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
    std::filesystem::path origin_dir_;
};

}  // namespace forge
