#include "forge/config.hpp"

#include <charconv>
#include <sstream>

#include "forge/error.hpp"
#include "forge/jsonl.hpp"

namespace forge {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(origin, number, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(origin, number, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(origin, number, "empty key");
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    auto cfg = parse(read_file(path), path.string());
    cfg.origin_dir_ = std::filesystem::absolute(path).parent_path();
    return cfg;
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

std::string KeyValueConfig::require(const std::string& key) const {
    auto v = find(key);
    if (!v) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return *v;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        throw ConfigError(origin_ + ": '" + key + "' is not an integer: " + *v);
    return out;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        double out = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument(*v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": '" + key + "' is not a number: " + *v);
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "yes" || *v == "1" || *v == "on") return true;
    if (*v == "false" || *v == "no" || *v == "0" || *v == "off") return false;
    throw ConfigError(origin_ + ": '" + key + "' is not a boolean: " + *v);
}

std::map<std::string, std::string> KeyValueConfig::section(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    const std::string p = prefix + ".";
    for (auto it = values_.lower_bound(p); it != values_.end() && it->first.compare(0, p.size(), p) == 0; ++it)
        out.emplace(it->first.substr(p.size()), it->second);
    return out;
}

}  // namespace forge
