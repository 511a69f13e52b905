#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unistd.h>

#include <fmt/format.h>

#include "forge/domain.hpp"
#include "forge/prompts.hpp"
#include "forge/sandbox.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() / fmt::format("forge-test-{}-{}-{}", ::getpid(), tag, counter++);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline forge::Requirement echo_requirement(const std::string& id = "echo", forge::Language lang = forge::Language::python) {
    forge::Requirement r;
    r.id = id;
    r.language = lang;
    r.statement = "Read a line and print it back.";
    forge::TestCase t1;
    t1.id = "t1";
    t1.input = "hello\n";
    t1.expected_output = "hello";
    forge::TestCase t2 = t1;
    t2.id = "t2";
    t2.input = "world\n";
    t2.expected_output = "world";
    r.tests = {t1, t2};
    return r;
}

inline forge::Program program(const std::string& id, const std::string& req, const std::string& code,
                              forge::Score target = 5, forge::Origin origin = forge::Origin::reference) {
    forge::Program p;
    p.id = id;
    p.requirement_id = req;
    p.code = code;
    p.target_score = target;
    p.origin = origin;
    return p;
}

inline std::map<forge::Language, forge::RunnerProfile> profiles() {
    std::map<forge::Language, forge::RunnerProfile> out;
    for (auto name : {"python", "cpp", "java"}) {
        auto p = forge::RunnerProfile::load(forge::default_data_dir() / "profiles" / (std::string(name) + ".conf"));
        out[p.language] = p;
    }
    return out;
}

}  // namespace testutil
