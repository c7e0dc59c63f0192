#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "starqa/gateway.hpp"

namespace starqa {
namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::milliseconds timeout) {
    // Split "scheme://host[:port]" from an optional path prefix such as "/v1".
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    client_ = std::make_unique<httplib::Client>(origin_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
    client_->set_connection_timeout(seconds.count(), micros.count());
    client_->set_read_timeout(seconds.count(), micros.count());
    client_->set_write_timeout(seconds.count(), micros.count());
  }

  HttpResponse post_json(const std::string& endpoint, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers) override {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    std::lock_guard lock(mutex_);
    auto result = client_->Post(prefix_ + endpoint, h, body, "application/json");
    if (!result) {
      throw TransportError(origin_ + prefix_ + endpoint + ": " + httplib::to_string(result.error()));
    }
    return HttpResponse{result->status, result->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::mutex mutex_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

}  // namespace starqa
