#include "starqa/mock_backends.hpp"

#include "starqa/hash.hpp"
#include "starqa/text.hpp"

namespace starqa {

std::string EchoChat::chat(const std::vector<ChatMessage>& messages, const ChatParams&) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return {};
}

EmbeddingVector HashedBowEmbedder::embed_one(std::string_view text) const {
  EmbeddingVector v{std::vector<float>(dim_, 0.0f)};
  for (const auto& token : text::tokenize_path_text(text)) {
    const auto h = fnv1a64(token);
    const auto bucket = static_cast<std::size_t>(h % dim_);
    v.values[bucket] += ((h >> 63) & 1U) ? -1.0f : 1.0f;
  }
  return v;
}

std::vector<EmbeddingVector> HashedBowEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

}  // namespace starqa
