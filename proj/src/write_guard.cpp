// Preloaded into sandboxed test processes. Refuses write-intent filesystem
// calls outside the directories listed in FORGE_GUARD_ALLOW (colon
// separated) and records each refusal in FORGE_GUARD_LOG.
#ifndef _GNU_SOURCE
#define _GNU_SOURCE
#endif
#include <dlfcn.h>
#include <errno.h>
#include <fcntl.h>
#include <limits.h>
#include <stdarg.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <unistd.h>

namespace {

bool has_prefix(const char* path, const char* root, size_t len) {
    if (strncmp(path, root, len) != 0) return false;
    return path[len] == '\0' || path[len] == '/' || (len > 0 && root[len - 1] == '/');
}

bool is_allowed(const char* abs) {
    static const char* const kAlways[] = {"/dev/null", "/dev/tty", "/dev/stdout",
                                          "/dev/stderr", "/dev/shm", "/proc/self/fd"};
    for (const char* root : kAlways)
        if (has_prefix(abs, root, strlen(root))) return true;
    const char* allow = getenv("FORGE_GUARD_ALLOW");
    if (!allow || !*allow) return true;  // guard inactive
    const char* p = allow;
    while (*p) {
        const char* end = strchr(p, ':');
        size_t len = end ? static_cast<size_t>(end - p) : strlen(p);
        if (len > 0 && has_prefix(abs, p, len)) return true;
        if (!end) break;
        p = end + 1;
    }
    return false;
}

// Lexically normalizes `in` (absolute) into `out`, resolving "." and "..".
void normalize(const char* in, char* out, size_t cap) {
    size_t n = 0;
    out[n++] = '/';
    const char* p = in;
    while (*p) {
        while (*p == '/') ++p;
        if (!*p) break;
        const char* seg = p;
        while (*p && *p != '/') ++p;
        size_t len = static_cast<size_t>(p - seg);
        if (len == 1 && seg[0] == '.') continue;
        if (len == 2 && seg[0] == '.' && seg[1] == '.') {
            if (n > 1) {
                --n;
                while (n > 1 && out[n - 1] != '/') --n;
                if (n > 1) --n;
            }
            continue;
        }
        if (n > 1 && n + 1 < cap) out[n++] = '/';
        for (size_t i = 0; i < len && n + 1 < cap; ++i) out[n++] = seg[i];
    }
    out[n] = '\0';
}

void absolute_path(int dirfd, const char* path, char* out, size_t cap) {
    char joined[PATH_MAX * 2];
    if (path[0] == '/') {
        snprintf(joined, sizeof joined, "%s", path);
    } else {
        char base[PATH_MAX] = "/";
        if (dirfd == AT_FDCWD) {
            if (!getcwd(base, sizeof base)) strcpy(base, "/");
        } else {
            char link[64];
            snprintf(link, sizeof link, "/proc/self/fd/%d", dirfd);
            ssize_t len = readlink(link, base, sizeof base - 1);
            base[len > 0 ? len : 0] = '\0';
        }
        snprintf(joined, sizeof joined, "%s/%s", base, path);
    }
    char lexical[PATH_MAX];
    normalize(joined, lexical, sizeof lexical);
    // Resolve symlinks in the parent directory when it exists.
    char parent[PATH_MAX];
    snprintf(parent, sizeof parent, "%s", lexical);
    char* slash = strrchr(parent, '/');
    if (slash && slash != parent) {
        *slash = '\0';
        char resolved[PATH_MAX];
        if (realpath(parent, resolved)) {
            snprintf(out, cap, "%s/%s", strcmp(resolved, "/") == 0 ? "" : resolved, slash + 1);
            return;
        }
    }
    snprintf(out, cap, "%s", lexical);
}

void report(const char* op, const char* abs) {
    const char* log = getenv("FORGE_GUARD_LOG");
    if (!log || !*log) return;
    int fd = static_cast<int>(syscall(SYS_openat, AT_FDCWD, log,
                                      O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
    if (fd < 0) return;
    char line[PATH_MAX + 64];
    int len = snprintf(line, sizeof line, "%s %s\n", op, abs);
    if (len > 0) syscall(SYS_write, fd, line, static_cast<size_t>(len));
    syscall(SYS_close, fd);
}

// Returns true (and sets errno) when the call must be refused.
bool deny(const char* op, int dirfd, const char* path) {
    if (!path) return false;
    char abs[PATH_MAX];
    absolute_path(dirfd, path, abs, sizeof abs);
    if (is_allowed(abs)) return false;
    report(op, abs);
    errno = EACCES;
    return true;
}

bool write_intent(int flags) {
    return (flags & O_ACCMODE) != O_RDONLY || (flags & (O_CREAT | O_TRUNC)) != 0;
}

bool mode_writes(const char* mode) {
    return mode && (strchr(mode, 'w') || strchr(mode, 'a') || strchr(mode, '+'));
}

int guarded_openat(int dirfd, const char* path, int flags, mode_t mode) {
    if (write_intent(flags) && deny("open", dirfd, path)) return -1;
    return static_cast<int>(syscall(SYS_openat, dirfd, path, flags, mode));
}

mode_t take_mode(int flags, va_list ap) {
    if (flags & (O_CREAT | __O_TMPFILE)) return static_cast<mode_t>(va_arg(ap, int));
    return 0;
}

using fopen_fn = FILE* (*)(const char*, const char*);
using freopen_fn = FILE* (*)(const char*, const char*, FILE*);

}  // namespace

extern "C" {

int open(const char* path, int flags, ...) {
    va_list ap;
    va_start(ap, flags);
    mode_t mode = take_mode(flags, ap);
    va_end(ap);
    return guarded_openat(AT_FDCWD, path, flags, mode);
}

int open64(const char* path, int flags, ...) {
    va_list ap;
    va_start(ap, flags);
    mode_t mode = take_mode(flags, ap);
    va_end(ap);
    return guarded_openat(AT_FDCWD, path, flags, mode);
}

int openat(int dirfd, const char* path, int flags, ...) {
    va_list ap;
    va_start(ap, flags);
    mode_t mode = take_mode(flags, ap);
    va_end(ap);
    return guarded_openat(dirfd, path, flags, mode);
}

int openat64(int dirfd, const char* path, int flags, ...) {
    va_list ap;
    va_start(ap, flags);
    mode_t mode = take_mode(flags, ap);
    va_end(ap);
    return guarded_openat(dirfd, path, flags, mode);
}

int __open_2(const char* path, int flags) { return guarded_openat(AT_FDCWD, path, flags, 0); }
int __open64_2(const char* path, int flags) { return guarded_openat(AT_FDCWD, path, flags, 0); }
int __openat_2(int dirfd, const char* path, int flags) { return guarded_openat(dirfd, path, flags, 0); }
int __openat64_2(int dirfd, const char* path, int flags) { return guarded_openat(dirfd, path, flags, 0); }

int creat(const char* path, mode_t mode) {
    return guarded_openat(AT_FDCWD, path, O_CREAT | O_WRONLY | O_TRUNC, mode);
}
int creat64(const char* path, mode_t mode) {
    return guarded_openat(AT_FDCWD, path, O_CREAT | O_WRONLY | O_TRUNC, mode);
}

FILE* fopen(const char* path, const char* mode) {
    if (mode_writes(mode) && deny("fopen", AT_FDCWD, path)) return nullptr;
    static auto real = reinterpret_cast<fopen_fn>(dlsym(RTLD_NEXT, "fopen"));
    return real(path, mode);
}

FILE* fopen64(const char* path, const char* mode) {
    if (mode_writes(mode) && deny("fopen", AT_FDCWD, path)) return nullptr;
    static auto real = reinterpret_cast<fopen_fn>(dlsym(RTLD_NEXT, "fopen64"));
    return real(path, mode);
}

FILE* freopen(const char* path, const char* mode, FILE* stream) {
    if (mode_writes(mode) && deny("freopen", AT_FDCWD, path)) return nullptr;
    static auto real = reinterpret_cast<freopen_fn>(dlsym(RTLD_NEXT, "freopen"));
    return real(path, mode, stream);
}

int mkdir(const char* path, mode_t mode) {
    if (deny("mkdir", AT_FDCWD, path)) return -1;
    return static_cast<int>(syscall(SYS_mkdirat, AT_FDCWD, path, mode));
}

int mkdirat(int dirfd, const char* path, mode_t mode) {
    if (deny("mkdir", dirfd, path)) return -1;
    return static_cast<int>(syscall(SYS_mkdirat, dirfd, path, mode));
}

int unlink(const char* path) {
    if (deny("unlink", AT_FDCWD, path)) return -1;
    return static_cast<int>(syscall(SYS_unlinkat, AT_FDCWD, path, 0));
}

int unlinkat(int dirfd, const char* path, int flags) {
    if (deny("unlink", dirfd, path)) return -1;
    return static_cast<int>(syscall(SYS_unlinkat, dirfd, path, flags));
}

int rmdir(const char* path) {
    if (deny("rmdir", AT_FDCWD, path)) return -1;
    return static_cast<int>(syscall(SYS_unlinkat, AT_FDCWD, path, AT_REMOVEDIR));
}

int rename(const char* from, const char* to) {
    if (deny("rename", AT_FDCWD, from) || deny("rename", AT_FDCWD, to)) return -1;
    return static_cast<int>(syscall(SYS_renameat, AT_FDCWD, from, AT_FDCWD, to));
}

int renameat(int fromfd, const char* from, int tofd, const char* to) {
    if (deny("rename", fromfd, from) || deny("rename", tofd, to)) return -1;
    return static_cast<int>(syscall(SYS_renameat, fromfd, from, tofd, to));
}

int truncate(const char* path, off_t length) {
    if (deny("truncate", AT_FDCWD, path)) return -1;
    return static_cast<int>(syscall(SYS_truncate, path, length));
}

int symlink(const char* target, const char* linkpath) {
    if (deny("symlink", AT_FDCWD, linkpath)) return -1;
    return static_cast<int>(syscall(SYS_symlinkat, target, AT_FDCWD, linkpath));
}

int link(const char* from, const char* to) {
    if (deny("link", AT_FDCWD, to)) return -1;
    return static_cast<int>(syscall(SYS_linkat, AT_FDCWD, from, AT_FDCWD, to, 0));
}

}  // extern "C"
