#pragma once

#include <algorithm>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace wsi {

/// Request/response exchange of one JSON object. Implementations throw
/// wsi::TransportError on any failure and must be safe to call from
/// several threads.
class JsonTransport {
 public:
  virtual ~JsonTransport() = default;
  virtual nlohmann::json exchange(const nlohmann::json& request) = 0;
  virtual std::string describe() const = 0;
};

/// POSTs the request body to `url` (http://host[:port]/path).
class HttpTransport : public JsonTransport {
 public:
  HttpTransport(std::string url, std::chrono::milliseconds timeout);
  nlohmann::json exchange(const nlohmann::json& request) override;
  std::string describe() const override { return url_; }

 private:
  std::string url_;
  std::string host_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

/// Spawns `command` under /bin/sh and talks to it one JSON object per line on
/// stdin/stdout. Exchanges are serialized; a dead or timed-out child is
/// restarted on the next exchange.
class ProcessTransport : public JsonTransport {
 public:
  ProcessTransport(std::string command, std::chrono::milliseconds timeout);
  ~ProcessTransport() override;
  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  nlohmann::json exchange(const nlohmann::json& request) override;
  std::string describe() const override { return "exec:" + command_; }

 private:
  void spawn();
  void shutdown();

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  int fd_ = -1;
  int pid_ = -1;
  std::string pending_;
};

/// "http://..." -> HttpTransport, "exec:<cmd>" -> ProcessTransport.
std::unique_ptr<JsonTransport> make_transport(const std::string& endpoint,
                                              std::chrono::milliseconds timeout);

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds base_delay{100};
};

/// Calls `fn` up to max_retries + 1 times, sleeping base_delay * 2^k between
/// attempts. Rethrows the last failure. `attempts` receives the count made.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn, int* attempts = nullptr) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    if (attempts) *attempts = attempt + 1;
    try {
      return fn();
    } catch (...) {
      if (attempt >= policy.max_retries) throw;
    }
    auto delay = policy.base_delay * (1LL << std::min(attempt, 16));
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
  }
}

}  // namespace wsi
