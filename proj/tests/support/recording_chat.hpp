#pragma once

#include <atomic>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "starqa/gateway.hpp"

namespace starqa::testing {

/// Serialized path named on the "Path: " line of a description prompt.
inline std::string prompt_target(const std::string& prompt) {
  const auto begin = prompt.find("Path: ") + 6;
  return prompt.substr(begin, prompt.find('\n', begin) - begin);
}

/// Deterministic describer backend that logs request start/finish events.
/// Replies "About <target>." and can be told to fail from the n-th call on,
/// or permanently for one target.
class RecordingChat final : public ChatBackend {
 public:
  struct Event {
    bool start;
    std::string target;
  };

  std::string model_id() const override { return "mock-recording"; }

  std::string chat(const std::vector<ChatMessage>& messages, const ChatParams&) override {
    const auto target = prompt_target(messages.back().content);
    const auto n = calls.fetch_add(1);
    log({true, target});
    if ((fail_from >= 0 && static_cast<long>(n) >= fail_from) || target == fail_target) {
      throw TransportError("injected failure at " + target);
    }
    log({false, target});
    return "About " + target + ".";
  }

  std::vector<Event> events() {
    std::lock_guard lock(mutex_);
    return events_;
  }

  std::vector<std::string> completed() {
    std::vector<std::string> out;
    for (const auto& e : events()) {
      if (!e.start) out.push_back(e.target);
    }
    return out;
  }

  std::atomic<std::size_t> calls{0};
  long fail_from = -1;
  std::string fail_target;

 private:
  void log(Event e) {
    std::lock_guard lock(mutex_);
    events_.push_back(std::move(e));
  }

  std::mutex mutex_;
  std::vector<Event> events_;
};

}  // namespace starqa::testing
