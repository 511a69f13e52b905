#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace forge {

// Text templates with {{name}} placeholders, one file per template
// (<dir>/<name>.txt).
class PromptLibrary {
public:
    PromptLibrary() = default;
    static PromptLibrary load(const std::filesystem::path& dir);

    void add(std::string name, std::string text);
    const std::string& get(const std::string& name) const;
    // sha256 of the template text.
    std::string digest(const std::string& name) const;

    std::string render(const std::string& name, const std::map<std::string, std::string>& values) const;

private:
    std::map<std::string, std::string> templates_;
};

// Replaces every {{key}}; unknown placeholders are left untouched.
std::string render_template(const std::string& text, const std::map<std::string, std::string>& values);

// Installed data directory (rule packs, prompts, runner profiles).
std::filesystem::path default_data_dir();

}  // namespace forge
