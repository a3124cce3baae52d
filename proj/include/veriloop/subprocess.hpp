#pragma once

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <poll.h>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "veriloop/util.hpp"

namespace veriloop {

struct ProcessResult {
    int exit_code = -1;       // negative signal number when killed by a signal
    bool timed_out = false;
    bool exec_failed = false; // the command itself could not be executed
    int exec_errno = 0;
    std::string out;          // stdout (or everything, in merged mode)
    std::string err;          // stderr (empty in merged mode)
};

namespace detail {

inline void set_cloexec(int fd) { fcntl(fd, F_SETFD, FD_CLOEXEC); }

} // namespace detail

// Runs argv in its own process group with stdin from /dev/null, working
// directory `cwd`, and a hard wall-clock timeout. In merged mode stdout and
// stderr share one pipe so diagnostics keep their arrival order.
inline ProcessResult run_process(const std::vector<std::string>& argv,
                                 const std::filesystem::path& cwd,
                                 std::chrono::milliseconds timeout,
                                 bool merge_output = false) {
    ProcessResult result;
    if (argv.empty()) throw error("run_process: empty argv");

    int out_pipe[2] = {-1, -1};
    int err_pipe[2] = {-1, -1};
    int status_pipe[2] = {-1, -1}; // child reports exec errno here
    if (pipe(out_pipe) != 0) throw error("pipe failed");
    if (!merge_output && pipe(err_pipe) != 0) throw error("pipe failed");
    if (pipe(status_pipe) != 0) throw error("pipe failed");
    detail::set_cloexec(status_pipe[1]);

    pid_t pid = fork();
    if (pid < 0) throw error("fork failed");

    if (pid == 0) {
        setpgid(0, 0);
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(merge_output ? out_pipe[1] : err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        if (!merge_output) {
            close(err_pipe[0]);
            close(err_pipe[1]);
        }
        close(status_pipe[0]);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) {
            int e = errno;
            (void)!write(status_pipe[1], &e, sizeof e);
            _exit(127);
        }
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        int e = errno;
        (void)!write(status_pipe[1], &e, sizeof e);
        _exit(127);
    }

    close(out_pipe[1]);
    if (!merge_output) close(err_pipe[1]);
    close(status_pipe[1]);

    auto deadline = std::chrono::steady_clock::now() + timeout;
    std::vector<pollfd> fds;
    fds.push_back({out_pipe[0], POLLIN, 0});
    if (!merge_output) fds.push_back({err_pipe[0], POLLIN, 0});
    fds.push_back({status_pipe[0], POLLIN, 0});

    bool killed = false;
    size_t open_fds = fds.size();
    while (open_fds > 0) {
        auto now = std::chrono::steady_clock::now();
        long wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        if (wait_ms < 0) wait_ms = 0;
        int rc = poll(fds.data(), fds.size(), static_cast<int>(std::min(wait_ms, 200L)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (auto& pfd : fds) {
            if (pfd.fd < 0 || !(pfd.revents & (POLLIN | POLLHUP | POLLERR))) continue;
            char buf[4096];
            ssize_t n = read(pfd.fd, buf, sizeof buf);
            if (n > 0) {
                if (pfd.fd == out_pipe[0]) result.out.append(buf, static_cast<size_t>(n));
                else if (pfd.fd == err_pipe[0]) result.err.append(buf, static_cast<size_t>(n));
                else if (pfd.fd == status_pipe[0] && n >= static_cast<ssize_t>(sizeof(int))) {
                    result.exec_failed = true;
                    std::memcpy(&result.exec_errno, buf, sizeof(int));
                }
            } else {
                close(pfd.fd);
                pfd.fd = -1;
                open_fds--;
            }
        }
        if (!killed && std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            result.timed_out = true;
            killed = true;
        }
    }
    for (auto& pfd : fds)
        if (pfd.fd >= 0) close(pfd.fd);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {}
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = -WTERMSIG(status);

    if (result.exec_failed) result.timed_out = false;
    return result;
}

// Splits a command string on whitespace. Commands are argv prefixes, not
// shell: no quoting or expansion.
inline std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : command) {
        if (c == ' ' || c == '\t') {
            if (!cur.empty()) parts.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

} // namespace veriloop
