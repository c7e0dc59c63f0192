#pragma once

#include <cstddef>
#include <string>

#include "starqa/gateway.hpp"

namespace starqa {

/// Replies with the content of the last user message.
class EchoChat final : public ChatBackend {
 public:
  std::string model_id() const override { return "mock-echo"; }
  std::string chat(const std::vector<ChatMessage>& messages, const ChatParams& params) override;
};

/// Hashed bag-of-words embedder. Each token (path-text tokenization) adds
/// +1 or -1 to one of `dim` buckets, both chosen by FNV-1a of the token.
/// Pure function of its input.
class HashedBowEmbedder final : public EmbeddingBackend {
 public:
  explicit HashedBowEmbedder(std::size_t dim = 256) : dim_(dim) {}

  std::string embedder_id() const override { return "mock-hashed-bow-" + std::to_string(dim_); }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

  EmbeddingVector embed_one(std::string_view text) const;

 private:
  std::size_t dim_;
};

}  // namespace starqa
