#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "forge/domain.hpp"

namespace forge {

// Calls `fn(record, line_number)` for every non-blank line. Lines whose
// first non-space character is '#' are comments. Throws ParseError on
// malformed JSON; exceptions thrown by `fn` are rethrown as ParseError
// carrying the line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    std::vector<T> out;
    for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(j.get<T>()); });
    return out;
}

// Serializes one record per line with sorted keys, no trailing spaces.
std::string to_jsonl_line(const Json& j);

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
    std::vector<Json> records;
    records.reserve(items.size());
    for (const auto& item : items) records.emplace_back(item);
    write_jsonl(path, records);
}

void append_jsonl(const std::filesystem::path& path, const Json& record);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace forge
