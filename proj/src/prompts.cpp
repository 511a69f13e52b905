#include "forge/prompts.hpp"

#include <cstdlib>

#include "forge/error.hpp"
#include "forge/hashing.hpp"
#include "forge/jsonl.hpp"

namespace forge {

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
    PromptLibrary lib;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            lib.add(entry.path().stem().string(), read_file(entry.path()));
    return lib;
}

void PromptLibrary::add(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }

const std::string& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("missing prompt template '" + name + "'");
    return it->second;
}

std::string PromptLibrary::digest(const std::string& name) const { return sha256_hex(get(name)); }

std::string PromptLibrary::render(const std::string& name, const std::map<std::string, std::string>& values) const {
    return render_template(get(name), values);
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) break;
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        out.append(text, pos, open - pos);
        auto it = values.find(text.substr(open + 2, close - open - 2));
        if (it == values.end()) out.append(text, open, close + 2 - open);
        else out += it->second;
        pos = close + 2;
    }
    out.append(text, pos, std::string::npos);
    return out;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("FORGE_DATA_DIR"); env && *env) return env;
    return FORGE_DATA_DIR;
}

}  // namespace forge
