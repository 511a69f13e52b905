#include <doctest.h>

#include <fstream>

#include "forge/sandbox.hpp"
#include "forge/subprocess.hpp"
#include "helpers.hpp"

using namespace forge;

namespace {

struct SandboxFixture {
    testutil::TempDir dir{"sandbox"};
    SandboxOptions options() const {
        SandboxOptions o;
        o.root = dir.path() / "ws";
        o.guard_library = default_guard_library();
        return o;
    }
    Sandbox sandbox{options(), testutil::profiles()};

    TestReport run(const std::string& code, const Requirement& req = testutil::echo_requirement()) const {
        return sandbox.run_tests(testutil::program("p", req.id, code), req);
    }
};

}  // namespace

TEST_CASE("output normalization") {
    CHECK(normalize_output("a  \nb\t\n\n\n") == "a\nb");
    CHECK(normalize_output("a\r\nb\r\n") == "a\nb");
    CHECK(normalize_output("") == "");
    CHECK(normalize_output("  lead") == "  lead");
}

TEST_CASE("status folding") {
    using T = TestStatus;
    auto fold = [](std::vector<T> s) {
        std::vector<TestOutcome> o;
        for (auto x : s) o.push_back({"t", x, "", "", std::nullopt});
        return overall_status(o);
    };
    CHECK(fold({T::pass, T::pass}) == FunctionalStatus::pass);
    CHECK(fold({T::pass, T::timeout}) == FunctionalStatus::fail);
    CHECK(fold({T::fail, T::env_error}) == FunctionalStatus::env_error);
    CHECK(fold({T::env_error, T::sandbox_violation}) == FunctionalStatus::sandbox_violation);
}

TEST_CASE("python programs pass, fail and time out") {
    SandboxFixture f;
    auto ok = f.run("print(input())\n");
    CHECK(ok.overall == FunctionalStatus::pass);
    REQUIRE(ok.per_test.size() == 2);
    CHECK(ok.per_test[0].stdout_digest.size() == 16);
    CHECK(f.run("print(input() + '   ')\n").overall == FunctionalStatus::pass);  // trailing blanks ignored
    auto wrong = f.run("print(input().upper())\n");
    CHECK(wrong.overall == FunctionalStatus::fail);
    CHECK(wrong.per_test[0].status == TestStatus::fail);

    auto req = testutil::echo_requirement();
    for (auto& t : req.tests) t.timeout = 1.0;
    auto slow = f.run("import time\ntime.sleep(30)\n", req);
    CHECK(slow.overall == FunctionalStatus::fail);
    CHECK(slow.per_test[0].status == TestStatus::timeout);
}

TEST_CASE("exact comparison keeps trailing blanks significant") {
    SandboxFixture f;
    auto o = f.options();
    o.comparison = OutputComparison::exact;
    Sandbox exact(o, testutil::profiles());
    auto req = testutil::echo_requirement();
    for (auto& t : req.tests) t.expected_output += "\n";
    CHECK(exact.run_tests(testutil::program("p", "echo", "print(input())\n"), req).overall == FunctionalStatus::pass);
    CHECK(exact.run_tests(testutil::program("p", "echo", "print(input() + ' ')\n"), req).overall ==
          FunctionalStatus::fail);
}

TEST_CASE("crash traces are scrubbed of workspace paths") {
    SandboxFixture f;
    auto r = f.run("raise ValueError('boom')\n");
    CHECK(r.overall == FunctionalStatus::fail);
    REQUIRE(r.per_test[0].exception_trace);
    CHECK(r.per_test[0].exception_trace->find("ValueError: boom") != std::string::npos);
    CHECK(r.per_test[0].stderr_excerpt.find("<workspace>") != std::string::npos);
    CHECK(r.per_test[0].stderr_excerpt.find(f.dir.path().string()) == std::string::npos);
}

TEST_CASE("writes outside the workspace are violations") {
    SandboxFixture f;
    if (f.options().guard_library.empty()) {
        MESSAGE("write guard not built; skipping guard check");
        return;
    }
    auto target = f.dir.path() / "escaped.txt";
    auto r = f.run("open(" + Json(target.string()).dump() + ", 'w').write('x')\nprint(input())\n");
    CHECK(r.overall == FunctionalStatus::sandbox_violation);
    CHECK_FALSE(std::filesystem::exists(target));
    CHECK(r.detail.find("escaped.txt") != std::string::npos);
    auto inside = f.run("open('scratch.txt', 'w').write('x')\nprint(input())\n");
    CHECK(inside.overall == FunctionalStatus::pass);
}

TEST_CASE("the write audit catches changes under audited roots") {
    SandboxFixture f;
    auto watched = f.dir.path() / "watched";
    std::filesystem::create_directories(watched);
    auto o = f.options();
    o.guard_library.clear();
    o.audit_roots = {watched};
    Sandbox audited(o, testutil::profiles());
    auto code = "open(" + Json((watched / "new.txt").string()).dump() + ", 'w').write('x')\nprint(input())\n";
    auto r = audited.run_tests(testutil::program("p", "echo", code), testutil::echo_requirement());
    CHECK(r.overall == FunctionalStatus::sandbox_violation);
    CHECK(r.detail.find("new.txt") != std::string::npos);
}

TEST_CASE("workspaces are removed unless kept") {
    SandboxFixture f;
    f.run("print(input())\n");
    CHECK(std::filesystem::is_empty(f.dir.path() / "ws"));
}

TEST_CASE("harness-command tests") {
    SandboxFixture f;
    auto req = testutil::echo_requirement("h");
    TestCase t;
    t.id = "h1";
    t.mode = TestMode::harness_command;
    t.command = "python3 -c \"import main; assert main.double(2) == 4\"";
    req.tests = {t};
    CHECK(f.run("def double(x):\n    return 2 * x\n", req).overall == FunctionalStatus::pass);
    CHECK(f.run("def double(x):\n    return x + 1\n", req).overall == FunctionalStatus::fail);
}

TEST_CASE("C++ programs compile and run") {
    SandboxFixture f;
    auto req = testutil::echo_requirement("cpp", Language::cpp);
    auto ok = f.run("#include <iostream>\n#include <string>\nint main(){std::string s;std::getline(std::cin,s);std::cout<<s<<\"\\n\";}\n", req);
    CHECK(ok.overall == FunctionalStatus::pass);
    auto broken = f.run("int main( {\n", req);
    CHECK(broken.overall == FunctionalStatus::fail);
    CHECK(broken.detail.find("compilation failed") != std::string::npos);
    CHECK(broken.per_test.size() == 2);
}

TEST_CASE("a missing toolchain is an environment error") {
    SandboxFixture f;
    auto req = testutil::echo_requirement("j", Language::java);
    auto r = f.run("class Main { public static void main(String[] a) {} }\n", req);
    if (find_executable("javac")) {
        MESSAGE("javac present; environment-error path not exercised");
        CHECK(r.overall != FunctionalStatus::env_error);
    } else {
        CHECK(r.overall == FunctionalStatus::env_error);
        CHECK(r.detail.find("not found") != std::string::npos);
    }
}

TEST_CASE("reference verification drops failures") {
    SandboxFixture f;
    auto a = testutil::echo_requirement("a");
    a.reference_program_ids = {"a1", "a2"};
    auto b = testutil::echo_requirement("b");
    b.reference_program_ids = {"b1"};
    std::vector<Program> refs{testutil::program("a1", "a", "print(input())\n"),
                              testutil::program("a2", "a", "print('no')\n"),
                              testutil::program("b1", "b", "print('no')\n")};
    auto v = verify_references({a, b}, refs, f.sandbox, 2);
    REQUIRE(v.requirements.size() == 1);
    CHECK(v.requirements[0].id == "a");
    CHECK(v.requirements[0].reference_program_ids == std::vector<std::string>{"a1"});
    REQUIRE(v.references.size() == 1);
    CHECK(v.references[0].functional_status == FunctionalStatus::pass);
    CHECK(v.reports.size() == 1);
    CHECK(v.log.size() == 3);
}
