#pragma once

#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "starqa/gateway.hpp"
#include "starqa/retrieval.hpp"

namespace starqa {

inline constexpr std::string_view kAnswerPromptVersion = "star-answer-v1";

struct Query {
  std::string text;
  std::string conference_id;

  /// Throws ValidationError when the question is blank.
  void validate() const;
};

/// Everything needed to replay one generation.
struct AnswerRecord {
  Query query;
  std::string answer;
  RetrievalResult retrieved;
  std::string generator_id;
  std::string prompt_version{kAnswerPromptVersion};
};

enum class EmptyRetrieval { reject, allow };

std::string_view answer_system_prompt();

/// Instruction, then the retrieved paths (serialized, in rank order), then
/// the question. Paths only: description text never reaches the generator.
std::string assemble_answer_prompt(const Query& query, const RetrievalResult& retrieved,
                                   EmptyRetrieval empty = EmptyRetrieval::reject);

/// Rebuilds the exact prompt a record was generated from.
std::string replay_prompt(const AnswerRecord& record);

/// Per-conference knowledge, shared read-only between queries.
class KnowledgeRegistry {
 public:
  void add(ConferenceKnowledge knowledge);
  /// Throws NotFoundError for conferences without knowledge.
  const ConferenceKnowledge& at(std::string_view conference_id) const;
  bool contains(std::string_view conference_id) const;
  std::vector<std::string> conferences() const;

 private:
  std::map<std::string, ConferenceKnowledge, std::less<>> by_conference_;
};

/// One retrieval-augmented answer, generated at temperature 0.
AnswerRecord answer(const Query& query, const KnowledgeRegistry& knowledge, const RetrieverConfig& config,
                    ChatBackend& generator, EmbeddingBackend* embedder,
                    EmptyRetrieval empty = EmptyRetrieval::reject);

/// Deterministic stand-in generator: replies with the leaf label of the
/// first path in an answer prompt, or "I don't know" when there is none.
class ExtractiveMockChat final : public ChatBackend {
 public:
  std::string model_id() const override { return "mock-extractive"; }
  std::string chat(const std::vector<ChatMessage>& messages, const ChatParams& params) override;
};

nlohmann::json to_json(const RetrievalResult& result);
nlohmann::json to_json(const AnswerRecord& record);
/// Inverse of to_json(); paths are re-parsed from their serialized form.
AnswerRecord answer_record_from_json(const nlohmann::json& value);

}  // namespace starqa
