#pragma once

// Minimal child-process helpers for driving the conflate binary from tests.

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

extern char** environ;

namespace proc {

struct Result {
  int exit_code = -1;
  std::string out;
  std::string err;
};

namespace detail {

inline pid_t spawn(const std::vector<std::string>& args, int out_fd[2], int err_fd[2]) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out_fd[1], STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_fd[1], STDERR_FILENO);
  posix_spawn_file_actions_addclose(&actions, out_fd[0]);
  posix_spawn_file_actions_addclose(&actions, err_fd[0]);

  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = posix_spawn(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(out_fd[1]);
  close(err_fd[1]);
  if (rc != 0) throw std::runtime_error("posix_spawn failed for " + args[0]);
  return pid;
}

}  // namespace detail

/// Runs to completion, capturing stdout and stderr.
inline Result run(const std::vector<std::string>& args) {
  int out_fd[2];
  int err_fd[2];
  if (pipe(out_fd) != 0 || pipe(err_fd) != 0) throw std::runtime_error("pipe failed");
  const pid_t pid = detail::spawn(args, out_fd, err_fd);

  Result result;
  std::array<pollfd, 2> fds = {pollfd{out_fd[0], POLLIN, 0}, pollfd{err_fd[0], POLLIN, 0}};
  std::array<std::string*, 2> sinks = {&result.out, &result.err};
  int open_fds = 2;
  char buf[4096];
  while (open_fds > 0) {
    if (poll(fds.data(), fds.size(), -1) < 0) break;
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || fds[i].revents == 0) continue;
      const ssize_t n = read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(n));
      } else {
        close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  int status = 0;
  waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

/// A `conflate serve` child. The constructor waits for the "serving" line
/// and parses the bound port from it; the destructor sends SIGTERM.
class Server {
 public:
  explicit Server(const std::vector<std::string>& args,
                  std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    int out_fd[2];
    int err_fd[2];
    if (pipe(out_fd) != 0 || pipe(err_fd) != 0) throw std::runtime_error("pipe failed");
    pid_ = detail::spawn(args, out_fd, err_fd);
    out_ = out_fd[0];
    err_ = err_fd[0];

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::string seen;
    static const std::regex serving(R"(serving .* on http://[^:]+:(\d+))");
    std::smatch m;
    while (!std::regex_search(seen, m, serving)) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      pollfd p{out_, POLLIN, 0};
      if (left.count() <= 0 || poll(&p, 1, static_cast<int>(left.count())) <= 0) {
        stop();
        throw std::runtime_error("server did not report its port: " + seen);
      }
      char buf[512];
      const ssize_t n = read(out_, buf, sizeof buf);
      if (n <= 0) {
        stop();
        throw std::runtime_error("server exited early: " + seen);
      }
      seen.append(buf, static_cast<std::size_t>(n));
    }
    port_ = std::stoi(m[1].str());
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  /// SIGTERM and reap; returns the exit status.
  int stop() {
    if (pid_ <= 0) return exit_code_;
    kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
    exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    pid_ = -1;
    close(out_);
    close(err_);
    return exit_code_;
  }

 private:
  pid_t pid_ = -1;
  int out_ = -1;
  int err_ = -1;
  int port_ = 0;
  int exit_code_ = -1;
};

}  // namespace proc
