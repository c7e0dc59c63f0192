#include "starqa/qa.hpp"

#include "starqa/errors.hpp"
#include "starqa/text.hpp"

namespace starqa {

using json = nlohmann::json;

namespace {
constexpr std::string_view kPathsHeading = "Knowledge paths:\n";
}

void Query::validate() const {
  if (text::trim(text).empty()) throw ValidationError("question is empty");
}

std::string_view answer_system_prompt() {
  return "You answer questions about academic conferences. Be brief and factual.";
}

std::string assemble_answer_prompt(const Query& query, const RetrievalResult& retrieved, EmptyRetrieval empty) {
  if (retrieved.ranked.empty() && empty == EmptyRetrieval::reject) {
    throw ValidationError("no retrieved paths for question: " + query.text);
  }
  std::string prompt =
      "Answer the question using only the knowledge paths below. Each path lists the labels from the root of "
      "the conference knowledge tree down to a value, separated by \">>\". If the paths do not contain the "
      "answer, say that you do not know.\n\n";
  prompt += kPathsHeading;
  for (std::size_t i = 0; i < retrieved.ranked.size(); ++i) {
    prompt += std::to_string(i + 1) + ". " + retrieved.ranked[i].path.serialized() + "\n";
  }
  prompt += "\nQuestion: " + query.text + "\nAnswer:";
  return prompt;
}

std::string replay_prompt(const AnswerRecord& record) {
  return assemble_answer_prompt(record.query, record.retrieved, EmptyRetrieval::allow);
}

void KnowledgeRegistry::add(ConferenceKnowledge knowledge) {
  auto id = knowledge.corpus.conference_id();
  by_conference_.insert_or_assign(std::move(id), std::move(knowledge));
}

const ConferenceKnowledge& KnowledgeRegistry::at(std::string_view conference_id) const {
  const auto it = by_conference_.find(conference_id);
  if (it == by_conference_.end()) throw NotFoundError("no knowledge loaded for conference '" + std::string(conference_id) + "'");
  return it->second;
}

bool KnowledgeRegistry::contains(std::string_view conference_id) const {
  return by_conference_.find(conference_id) != by_conference_.end();
}

std::vector<std::string> KnowledgeRegistry::conferences() const {
  std::vector<std::string> out;
  for (const auto& [id, k] : by_conference_) out.push_back(id);
  return out;
}

AnswerRecord answer(const Query& query, const KnowledgeRegistry& knowledge, const RetrieverConfig& config,
                    ChatBackend& generator, EmbeddingBackend* embedder, EmptyRetrieval empty) {
  query.validate();
  const auto& conference = knowledge.at(query.conference_id);
  AnswerRecord record;
  record.query = query;
  record.retrieved = retrieve(query.text, conference, embedder, config);
  record.generator_id = generator.model_id();
  const std::vector<ChatMessage> messages{{"system", std::string(answer_system_prompt())},
                                          {"user", assemble_answer_prompt(query, record.retrieved, empty)}};
  record.answer = text::trim(generator.chat(messages, ChatParams{}));
  return record;
}

std::string ExtractiveMockChat::chat(const std::vector<ChatMessage>& messages, const ChatParams&) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role != "user") continue;
    const auto& prompt = it->content;
    const auto heading = prompt.find(kPathsHeading);
    if (heading == std::string::npos) break;
    const auto line_start = heading + kPathsHeading.size();
    if (prompt.compare(line_start, 3, "1. ") != 0) break;
    const auto line_end = prompt.find('\n', line_start);
    const auto line = prompt.substr(line_start + 3, line_end - line_start - 3);
    const auto sep = line.rfind(">>");
    return sep == std::string::npos ? line : line.substr(sep + 2);
  }
  return "I don't know";
}

json to_json(const RetrievalResult& result) {
  json ranked = json::array();
  for (const auto& item : result.ranked) ranked.push_back({{"path", item.path.serialized()}, {"score", item.score}});
  return json{{"query", result.query},
              {"config",
               {{"k", result.config.k},
                {"retriever", to_string(result.config.retriever)},
                {"bm25_k1", result.config.bm25_k1},
                {"bm25_b", result.config.bm25_b}}},
              {"ranked", std::move(ranked)}};
}

json to_json(const AnswerRecord& record) {
  return json{{"query", {{"text", record.query.text}, {"conference", record.query.conference_id}}},
              {"answer", record.answer},
              {"retrieved", to_json(record.retrieved)},
              {"generator_id", record.generator_id},
              {"prompt_version", record.prompt_version}};
}

AnswerRecord answer_record_from_json(const json& value) {
  AnswerRecord record;
  record.query.text = value.at("query").at("text").get<std::string>();
  record.query.conference_id = value.at("query").at("conference").get<std::string>();
  record.answer = value.at("answer").get<std::string>();
  record.generator_id = value.at("generator_id").get<std::string>();
  record.prompt_version = value.at("prompt_version").get<std::string>();
  const auto& retrieved = value.at("retrieved");
  record.retrieved.query = retrieved.at("query").get<std::string>();
  const auto& config = retrieved.at("config");
  record.retrieved.config.k = config.at("k").get<std::size_t>();
  record.retrieved.config.retriever = parse_retriever(config.at("retriever").get<std::string>());
  record.retrieved.config.bm25_k1 = config.at("bm25_k1").get<double>();
  record.retrieved.config.bm25_b = config.at("bm25_b").get<double>();
  for (const auto& item : retrieved.at("ranked")) {
    record.retrieved.ranked.push_back({parse(item.at("path").get<std::string>()), item.at("score").get<double>()});
  }
  return record;
}

}  // namespace starqa
