#include "modpipe/transport.hpp"

#include <cstdlib>
#include <memory>
#include <regex>
#include <thread>

#include <httplib.h>

#include "modpipe/error.hpp"

namespace modpipe {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw TransportError("unsupported endpoint URL '" + url + "'", false);
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

HttpTransport::HttpTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

HttpResponse HttpTransport::post(const std::string& url, const std::string& body,
                                 const Headers& headers) {
  const SplitUrl target = split_url(url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers request_headers;
  for (const auto& [k, v] : headers) request_headers.emplace(k, v);
  auto result = client.Post(target.path, request_headers, body, "application/json");
  if (!result) {
    throw TransportError("request to " + target.origin + " failed: " +
                             httplib::to_string(result.error()),
                         true);
  }
  return {result->status, result->body};
}

HttpResponse CountingTransport::post(const std::string& url, const std::string& body,
                                     const Headers& headers) {
  calls_.fetch_add(1);
  if (!inner_) throw TransportError("counting transport has no backend", false);
  return inner_->post(url, body, headers);
}

HttpResponse post_with_retries(Transport& transport, const std::string& url,
                               const std::string& body, const Headers& headers,
                               const RetryPolicy& policy) {
  auto backoff = policy.initial_backoff;
  const int attempts = std::max(1, policy.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      HttpResponse response = transport.post(url, body, headers);
      if (response.status >= 200 && response.status < 300) return response;
      const bool retriable = response.status == 429 || response.status >= 500;
      last_error = "HTTP " + std::to_string(response.status);
      if (!retriable) throw TransportError(url + ": " + last_error, false);
    } catch (const TransportError& e) {
      if (!e.retriable()) throw;
      last_error = e.what();
    }
    if (attempt < attempts && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw TransportError(url + ": giving up after " + std::to_string(attempts) +
                           " attempts: " + last_error,
                       true);
}

std::string credential_from_env(const std::string& variable) {
  if (variable.empty()) return {};
  const char* value = std::getenv(variable.c_str());
  return value ? std::string(value) : std::string();
}

Headers redact(const Headers& headers) {
  Headers out = headers;
  for (auto& [key, value] : out) {
    std::string lower = key;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "authorization" || lower.find("key") != std::string::npos ||
        lower.find("token") != std::string::npos) {
      value = "<redacted>";
    }
  }
  return out;
}

}  // namespace modpipe
