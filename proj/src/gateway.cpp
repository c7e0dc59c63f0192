#include "starqa/gateway.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "starqa/hash.hpp"
#include "starqa/io.hpp"

namespace starqa {

using json = nlohmann::json;

void ProviderConfig::validate() const {
  if (base_url.empty()) throw ConfigError("provider.base_url is empty");
  if (timeout.count() <= 0) throw ConfigError("provider.timeout must be positive");
  if (max_retries < 0) throw ConfigError("provider.max_retries must be >= 0");
  if (rate_limit < 0) throw ConfigError("provider.rate_limit must be >= 0");
  if (embed_batch == 0) throw ConfigError("provider.embed_batch must be >= 1");
}

// ---------------------------------------------------------------------------
// Clock and rate limiting

Clock::time_point SystemClock::now() { return std::chrono::steady_clock::now(); }

void SystemClock::sleep_until(time_point when) { std::this_thread::sleep_until(when); }

SystemClock& SystemClock::instance() {
  static SystemClock clock;
  return clock;
}

RateLimiter::RateLimiter(double per_minute, Clock& clock)
    : limit_(static_cast<std::size_t>(std::floor(per_minute))), clock_(clock) {
  if (limit_ == 0) throw ConfigError("rate limit must allow at least one request per minute");
}

void RateLimiter::acquire() {
  constexpr auto kWindow = std::chrono::minutes(1);
  std::unique_lock lock(mutex_);
  while (true) {
    const auto now = clock_.now();
    while (!granted_.empty() && granted_.front() + kWindow <= now) granted_.pop_front();
    if (granted_.size() < limit_) {
      granted_.push_back(now);
      return;
    }
    const auto wake = granted_.front() + kWindow;
    lock.unlock();
    clock_.sleep_until(wake);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------
// Response cache

ResponseCache::ResponseCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  if (!directory_.empty()) std::filesystem::create_directories(directory_);
}

std::filesystem::path ResponseCache::entry_file(const std::string& key) const {
  return directory_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& request_payload) {
  const auto key = sha256_hex(request_payload);
  std::lock_guard lock(mutex_);
  if (directory_.empty()) {
    const auto it = memory_.find(key);
    if (it == memory_.end() || it->second.first != request_payload) return std::nullopt;
    ++hits_;
    return it->second.second;
  }
  const auto file = entry_file(key);
  if (!std::filesystem::exists(file)) return std::nullopt;
  try {
    const auto entry = json::parse(io::read_file(file));
    if (entry.at("request").get<std::string>() != request_payload) return std::nullopt;
    ++hits_;
    return entry.at("response").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable entries are treated as misses and overwritten
  }
}

void ResponseCache::put(const std::string& request_payload, const std::string& response) {
  const auto key = sha256_hex(request_payload);
  std::lock_guard lock(mutex_);
  if (directory_.empty()) {
    memory_[key] = {request_payload, response};
    return;
  }
  const auto created = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
  json entry = {{"request", request_payload}, {"response", response}, {"created_at", created}};
  io::write_file_atomic(entry_file(key), entry.dump());
}

std::size_t ResponseCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

// ---------------------------------------------------------------------------
// OpenAI-compatible client

OpenAIClient::OpenAIClient(ProviderConfig config, std::unique_ptr<HttpTransport> transport,
                           std::shared_ptr<ResponseCache> cache, Clock* clock, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!cache_) cache_ = std::make_shared<ResponseCache>();
  if (config_.rate_limit > 0) {
    limiter_ = std::make_unique<RateLimiter>(config_.rate_limit, clock ? *clock : SystemClock::instance());
  }
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::size_t OpenAIClient::upstream_calls() const {
  std::lock_guard lock(stats_mutex_);
  return upstream_calls_;
}

std::string OpenAIClient::post_with_retry(const std::string& endpoint, const std::string& body) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto backoff = std::min<long long>(30000, 500LL << std::min(attempt - 1, 6));
      sleeper_(std::chrono::milliseconds(backoff));
    }
    if (limiter_) limiter_->acquire();
    {
      std::lock_guard lock(stats_mutex_);
      ++upstream_calls_;
    }
    HttpResponse response;
    try {
      response = transport_->post_json(endpoint, body, headers);
    } catch (const TransportError& e) {
      last_failure = e.what();
      continue;
    }
    if (response.status == 401 || response.status == 403) {
      throw AuthError(endpoint + " rejected credentials (HTTP " + std::to_string(response.status) +
                      "); check $" + config_.api_key_env);
    }
    if (response.status == 429 || response.status >= 500) {
      last_failure = "HTTP " + std::to_string(response.status);
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw GatewayError(endpoint + " failed with HTTP " + std::to_string(response.status) + ": " +
                         response.body.substr(0, 300));
    }
    return response.body;
  }
  throw TransportError(endpoint + " failed after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_failure);
}

std::string OpenAIClient::chat(const std::vector<ChatMessage>& messages, const ChatParams& params) {
  json request = {{"model", config_.chat_model}, {"temperature", params.temperature}};
  json list = json::array();
  for (const auto& m : messages) list.push_back({{"role", m.role}, {"content", m.content}});
  request["messages"] = std::move(list);
  if (params.max_tokens) request["max_tokens"] = *params.max_tokens;
  const auto payload = request.dump();

  const bool cacheable = params.temperature == 0.0;
  if (cacheable) {
    if (auto hit = cache_->get(payload)) return *hit;
  }
  const auto body = post_with_retry("/chat/completions", payload);
  std::string content;
  try {
    content = json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw GatewayError(std::string("malformed chat response: ") + e.what());
  }
  if (cacheable) cache_->put(payload, content);
  return content;
}

std::vector<EmbeddingVector> OpenAIClient::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::size_t> missing;
  auto cache_payload = [&](const std::string& text) {
    return json({{"model", config_.embed_model}, {"input", text}}).dump();
  };
  auto decode_cached = [](const std::string& s) {
    return EmbeddingVector{json::parse(s).get<std::vector<float>>()};
  };

  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_->get(cache_payload(texts[i]))) {
      out[i] = decode_cached(*hit);
    } else {
      missing.push_back(i);
    }
  }

  for (std::size_t begin = 0; begin < missing.size(); begin += config_.embed_batch) {
    const auto end = std::min(missing.size(), begin + config_.embed_batch);
    json inputs = json::array();
    for (auto i = begin; i < end; ++i) inputs.push_back(texts[missing[i]]);
    const json request = {{"model", config_.embed_model}, {"input", std::move(inputs)}};
    const auto body = post_with_retry("/embeddings", request.dump());
    try {
      const auto data = json::parse(body).at("data");
      if (data.size() != end - begin) {
        throw GatewayError("embedding response has " + std::to_string(data.size()) + " vectors for " +
                           std::to_string(end - begin) + " inputs");
      }
      for (std::size_t j = 0; j < data.size(); ++j) {
        const auto& item = data[j];
        const auto slot = item.contains("index") ? item.at("index").get<std::size_t>() : j;
        if (slot >= end - begin) throw GatewayError("embedding response index out of range");
        auto values = item.at("embedding").get<std::vector<float>>();
        const auto target = missing[begin + slot];
        cache_->put(cache_payload(texts[target]), json(values).dump());
        out[target] = EmbeddingVector{std::move(values)};
      }
    } catch (const json::exception& e) {
      throw GatewayError(std::string("malformed embedding response: ") + e.what());
    }
  }

  for (const auto& v : out) {
    if (v.dim() == 0 || v.dim() != out.front().dim()) {
      throw GatewayError("embedding dimension drift: got " + std::to_string(v.dim()) + " and " +
                         std::to_string(out.front().dim()));
    }
  }
  return out;
}

}  // namespace starqa
