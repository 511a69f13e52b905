#include "forge/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <vector>

#include "forge/error.hpp"

extern char** environ;

namespace forge {

namespace {

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fd, O_CLOEXEC) != 0) throw ExternalError(std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (fd[0] >= 0) ::close(fd[0]);
        fd[0] = -1;
    }
    void close_write() {
        if (fd[1] >= 0) ::close(fd[1]);
        fd[1] = -1;
    }
};

void set_limit(int resource, rlim_t value) {
    rlimit rl{value, value};
    ::setrlimit(resource, &rl);
}

}  // namespace

std::optional<std::filesystem::path> find_executable(const std::string& name) {
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string::npos) {
        if (::access(name.c_str(), X_OK) == 0) return std::filesystem::path(name);
        return std::nullopt;
    }
    const char* path = std::getenv("PATH");
    std::istringstream dirs(path ? path : "/usr/bin:/bin");
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
        if (dir.empty()) continue;
        auto candidate = std::filesystem::path(dir) / name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    }
    return std::nullopt;
}

ProcessResult run_process(const std::string& command, const std::filesystem::path& cwd,
                          const std::map<std::string, std::string>& env,
                          const std::string& stdin_data, const ProcessLimits& limits) {
    ProcessResult result;
    Pipe in, out, err;

    std::map<std::string, std::string> merged;
    for (char** e = environ; e && *e; ++e) {
        std::string kv(*e);
        auto eq = kv.find('=');
        if (eq != std::string::npos) merged[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : env) merged[k] = v;
    std::vector<std::string> env_strings;
    for (const auto& [k, v] : merged) env_strings.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::string cwd_str = cwd.string();

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw ExternalError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in.fd[0], STDIN_FILENO);
        ::dup2(out.fd[1], STDOUT_FILENO);
        ::dup2(err.fd[1], STDERR_FILENO);
        if (!cwd_str.empty() && ::chdir(cwd_str.c_str()) != 0) _exit(126);
        if (limits.cpu_seconds > 0) {
            auto secs = static_cast<rlim_t>(std::ceil(limits.cpu_seconds));
            rlimit rl{secs, secs + 1};
            ::setrlimit(RLIMIT_CPU, &rl);
        }
        if (limits.memory_bytes > 0) set_limit(RLIMIT_AS, limits.memory_bytes);
        set_limit(RLIMIT_CORE, 0);
        const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
        ::execve("/bin/sh", const_cast<char* const*>(argv), envp.data());
        _exit(127);
    }
    ::setpgid(pid, pid);
    in.close_read();
    out.close_write();
    err.close_write();

    std::size_t written = 0;
    if (stdin_data.empty()) in.close_write();
    else ::fcntl(in.fd[1], F_SETFL, O_NONBLOCK);

    const auto deadline = start + std::chrono::duration<double>(limits.wall_seconds);
    char buf[65536];
    while (out.fd[0] >= 0 || err.fd[0] >= 0) {
        std::vector<pollfd> fds;
        if (out.fd[0] >= 0) fds.push_back({out.fd[0], POLLIN, 0});
        if (err.fd[0] >= 0) fds.push_back({err.fd[0], POLLIN, 0});
        const int in_fd = in.fd[1];
        const int out_fd = out.fd[0];
        if (in_fd >= 0) fds.push_back({in_fd, POLLOUT, 0});
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            result.timed_out = true;
            break;
        }
        int n = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long>(remaining.count(), 100)));
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (const auto& p : fds) {
            if (!p.revents) continue;
            if (p.fd == in_fd) {
                if (in.fd[1] < 0) continue;
                if (p.revents & (POLLERR | POLLHUP)) {
                    in.close_write();
                    continue;
                }
                ssize_t w = ::write(p.fd, stdin_data.data() + written, stdin_data.size() - written);
                if (w > 0) written += static_cast<std::size_t>(w);
                if (w < 0 && errno != EAGAIN) in.close_write();
                if (written >= stdin_data.size()) in.close_write();
                continue;
            }
            ssize_t r = ::read(p.fd, buf, sizeof buf);
            std::string& sink = p.fd == out_fd ? result.out : result.err;
            if (r > 0) {
                if (sink.size() < limits.output_cap)
                    sink.append(buf, static_cast<std::size_t>(
                                         std::min<std::size_t>(r, limits.output_cap - sink.size())));
            } else if (r == 0 || (r < 0 && errno != EAGAIN && errno != EINTR)) {
                if (p.fd == out_fd) out.close_read();
                else err.close_read();
            }
        }
    }
    in.close_write();

    int status = 0;
    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
    } else {
        // Streams closed; the process should be exiting. Enforce the deadline.
        for (;;) {
            pid_t w = ::waitpid(pid, &status, WNOHANG);
            if (w == pid) break;
            if (w < 0 && errno != EINTR) break;
            if (std::chrono::steady_clock::now() >= deadline) {
                result.timed_out = true;
                ::kill(-pid, SIGKILL);
                ::waitpid(pid, &status, 0);
                break;
            }
            ::usleep(2000);
        }
    }
    // Reap stragglers left in the group (background children).
    ::kill(-pid, SIGKILL);

    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    if (WIFSIGNALED(status)) {
        result.term_signal = WTERMSIG(status);
        if (result.term_signal == SIGXCPU) result.timed_out = true;
    }
    if (!result.timed_out && result.exit_code == 127 && result.term_signal == 0 &&
        result.err.find("not found") != std::string::npos)
        result.spawn_failed = true;
    return result;
}

}  // namespace forge
