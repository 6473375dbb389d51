#include "wsi/transport.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>
#include <httplib.h>

#include "wsi/error.hpp"

namespace wsi {

HttpTransport::HttpTransport(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
  constexpr std::string_view scheme = "http://";
  if (url_.rfind(scheme, 0) != 0) throw ConfigError(fmt::format("unsupported endpoint {}", url_));
  auto rest = url_.substr(scheme.size());
  auto slash = rest.find('/');
  host_ = std::string(scheme) + (slash == std::string::npos ? rest : rest.substr(0, slash));
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
}

nlohmann::json HttpTransport::exchange(const nlohmann::json& request) {
  // one client per call keeps concurrent callers independent
  httplib::Client client(host_);
  auto secs = timeout_.count() / 1000;
  auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw TransportError(fmt::format("{}: {}", url_, httplib::to_string(res.error())));
  }
  if (res->status != 200) {
    throw TransportError(fmt::format("{}: HTTP {}", url_, res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(fmt::format("{}: malformed response: {}", url_, e.what()));
  }
}

ProcessTransport::ProcessTransport(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

ProcessTransport::~ProcessTransport() { shutdown(); }

void ProcessTransport::spawn() {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw TransportError(fmt::format("socketpair: {}", std::strerror(errno)));
  }
  pid_t pid = fork();
  if (pid < 0) {
    close(sv[0]);
    close(sv[1]);
    throw TransportError(fmt::format("fork: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    dup2(sv[1], STDIN_FILENO);
    dup2(sv[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(sv[1]);
  fd_ = sv[0];
  pid_ = pid;
  pending_.clear();
}

void ProcessTransport::shutdown() {
  if (fd_ >= 0) {
    close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == 0) {
      kill(pid_, SIGTERM);
      waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
}

nlohmann::json ProcessTransport::exchange(const nlohmann::json& request) {
  std::lock_guard lock(mutex_);
  if (fd_ < 0) spawn();

  auto fail = [this](const std::string& why) -> TransportError {
    shutdown();
    return TransportError(fmt::format("exec:{}: {}", command_, why));
  };

  std::string line = request.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    auto n = send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw fail(fmt::format("write failed: {}", std::strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }

  auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      try {
        return nlohmann::json::parse(reply);
      } catch (const nlohmann::json::exception& e) {
        throw fail(fmt::format("malformed response: {}", e.what()));
      }
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw fail("timed out");
    pollfd pfd{fd_, POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) throw fail("timed out");
    char buf[65536];
    auto n = recv(fd_, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw fail("child closed the connection");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<JsonTransport> make_transport(const std::string& endpoint,
                                              std::chrono::milliseconds timeout) {
  if (endpoint.rfind("http://", 0) == 0) return std::make_unique<HttpTransport>(endpoint, timeout);
  if (endpoint.rfind("exec:", 0) == 0) {
    return std::make_unique<ProcessTransport>(endpoint.substr(5), timeout);
  }
  throw ConfigError(fmt::format("unsupported endpoint '{}'", endpoint));
}

}  // namespace wsi
