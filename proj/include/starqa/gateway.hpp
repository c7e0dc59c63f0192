#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "starqa/errors.hpp"

namespace starqa {

class GatewayError : public Error {
 public:
  explicit GatewayError(const std::string& message) : Error("gateway", message) {}
  GatewayError(std::string kind, const std::string& message) : Error(std::move(kind), message) {}
};

/// Credentials rejected (HTTP 401/403). Never retried.
class AuthError : public GatewayError {
 public:
  explicit AuthError(const std::string& message) : GatewayError("auth", message) {}
};

/// Connection failures, timeouts, and 429/5xx responses once retries ran out.
class TransportError : public GatewayError {
 public:
  explicit TransportError(const std::string& message) : GatewayError("transport", message) {}
};

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatParams {
  double temperature = 0.0;
  std::optional<int> max_tokens;
};

/// A chat-completion backend. Implementations must be safe to call from
/// several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string model_id() const = 0;
  virtual std::string chat(const std::vector<ChatMessage>& messages, const ChatParams& params) = 0;
};

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

/// An embedding backend. Output is one vector per input, in input order.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string embedder_id() const = 0;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string chat_model = "gpt-3.5-turbo";
  std::string embed_model = "text-embedding-ada-002";
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  double rate_limit = 0.0;  // requests per minute, 0 = unlimited
  std::size_t embed_batch = 100;

  /// Throws ConfigError if an invariant does not hold.
  void validate() const;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One POST of a JSON body. Throws TransportError when no response arrives.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& endpoint, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// cpp-httplib transport rooted at `base_url` (scheme://host[:port][/prefix]).
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::chrono::milliseconds timeout);

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point when) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() override;
  void sleep_until(time_point when) override;
  static SystemClock& instance();
};

/// Sliding one-minute window: at most `per_minute` grants in any 60 s span.
class RateLimiter {
 public:
  RateLimiter(double per_minute, Clock& clock);

  /// Blocks until a request may be sent.
  void acquire();

 private:
  std::size_t limit_;
  Clock& clock_;
  std::mutex mutex_;
  std::deque<Clock::time_point> granted_;
};

/// Response cache keyed by sha256 of the full request payload. Hits are
/// confirmed by comparing the stored payload byte for byte. With an empty
/// directory the cache lives in memory only.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory = {});

  std::optional<std::string> get(const std::string& request_payload);
  void put(const std::string& request_payload, const std::string& response);

  std::size_t hits() const;

 private:
  std::filesystem::path entry_file(const std::string& key) const;

  std::filesystem::path directory_;
  mutable std::mutex mutex_;
  std::map<std::string, std::pair<std::string, std::string>> memory_;
  std::size_t hits_ = 0;
};

/// Client for OpenAI-compatible /chat/completions and /embeddings endpoints.
/// Temperature-0 chats and all embeddings go through the cache; 429, 5xx and
/// transport failures are retried with exponential backoff.
class OpenAIClient final : public ChatBackend, public EmbeddingBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  OpenAIClient(ProviderConfig config, std::unique_ptr<HttpTransport> transport,
               std::shared_ptr<ResponseCache> cache = nullptr, Clock* clock = nullptr, Sleeper sleeper = {});

  std::string model_id() const override { return config_.chat_model; }
  std::string embedder_id() const override { return config_.embed_model; }

  std::string chat(const std::vector<ChatMessage>& messages, const ChatParams& params) override;
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

  std::size_t upstream_calls() const;

 private:
  std::string post_with_retry(const std::string& endpoint, const std::string& body);

  ProviderConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<RateLimiter> limiter_;
  Sleeper sleeper_;
  mutable std::mutex stats_mutex_;
  std::size_t upstream_calls_ = 0;
};

}  // namespace starqa
