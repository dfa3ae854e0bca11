#pragma once

#include <atomic>
#include <memory>
#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace modpipe {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal POST-only transport. Implementations throw TransportError when no
/// response could be obtained; HTTP error statuses are returned, not thrown.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const Headers& headers) = 0;
};

/// cpp-httplib backed transport. Supports http:// and https:// URLs.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::chrono::milliseconds timeout = std::chrono::seconds(60));
  HttpResponse post(const std::string& url, const std::string& body,
                    const Headers& headers) override;

 private:
  std::chrono::milliseconds timeout_;
};

/// Wraps another transport and counts calls. Used to assert that offline
/// (stub / replay) runs never reach the network.
class CountingTransport final : public Transport {
 public:
  explicit CountingTransport(std::shared_ptr<Transport> inner = nullptr)
      : inner_(std::move(inner)) {}

  HttpResponse post(const std::string& url, const std::string& body,
                    const Headers& headers) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::shared_ptr<Transport> inner_;
  std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
};

/// POSTs with bounded retries and exponential backoff. Retries on transport
/// failures, 429 and 5xx; any other non-2xx status throws immediately.
HttpResponse post_with_retries(Transport& transport, const std::string& url,
                               const std::string& body, const Headers& headers,
                               const RetryPolicy& policy);

/// Reads a credential from the environment; empty when unset or when
/// `variable` is empty.
std::string credential_from_env(const std::string& variable);

/// Replaces credential-looking header values for logging.
Headers redact(const Headers& headers);

}  // namespace modpipe
