#include "forge/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        Json record;
        try {
            record = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(path.string(), number, e.what());
        }
        try {
            fn(record, number);
        } catch (const ParseError&) {
            throw;
        } catch (const Json::exception& e) {
            throw ParseError(path.string(), number, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), number, e.what());
        }
    }
}

std::string to_jsonl_line(const Json& j) {
    // nlohmann::json objects are std::map backed, so keys come out sorted.
    return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

void append_jsonl(const std::filesystem::path& path, const Json& record) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw ValidationError("cannot append to " + path.string());
    out << to_jsonl_line(record) << '\n';
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace forge
