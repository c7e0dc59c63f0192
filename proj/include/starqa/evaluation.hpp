#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "starqa/gateway.hpp"
#include "starqa/qa.hpp"

namespace starqa {

inline constexpr std::string_view kJudgePromptVersion = "star-judge-v1";

enum class AnswerOrigin { extraction, reasoning };
enum class PathSupport { atomic, complex };

struct QuestionType {
  AnswerOrigin origin = AnswerOrigin::extraction;
  PathSupport support = PathSupport::atomic;

  /// "EA", "EC", "RA" or "RC".
  std::string code() const;
  /// Accepts the two-letter codes and spelled-out forms such as
  /// "extraction-atomic" or "reasoning complex" (case-insensitive).
  static QuestionType parse(std::string_view text);

  bool operator==(const QuestionType&) const = default;
};

struct QAPair {
  std::string question;
  std::string gold_answer;
  std::vector<std::string> answer_source_paths;
  QuestionType qtype;
  std::string conference_id;

  /// Source paths must parse; atomic pairs have exactly one, complex more.
  void validate() const;
};

/// QA pairs file: JSON lines (or one JSON array) of
/// {question, gold_answer, answer_source_paths, qtype, conference}.
/// Also accepts "answer", "source"/"sources"/"paths", "type" and
/// "conference_id" as field names.
std::vector<QAPair> parse_pairs(std::string_view content);
std::vector<QAPair> load_pairs_file(const std::filesystem::path& file);
nlohmann::json to_json(const QAPair& pair);

/// Answer tokenization (see text::tokenize).
std::vector<std::string> tokenize(std::string_view text);

/// Bag-of-tokens F1 in [0, 1]. Two empty token lists score 1, one empty
/// list scores 0.
double token_f1(std::string_view prediction, std::string_view gold);

enum class Verdict { match, no_match, unjudged };
std::string_view to_string(Verdict verdict);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string id() const = 0;
  virtual bool is_llm() const = 0;
  virtual Verdict judge(std::string_view prediction, std::string_view gold, std::string_view question) = 0;
};

/// Offline exact-match rule: match iff the normalized gold answer occurs as a
/// contiguous token run in the normalized prediction, or token F1 >= 0.99.
/// An empty gold answer matches only an empty prediction.
class FallbackJudge final : public Judge {
 public:
  std::string id() const override { return "fallback-v1"; }
  bool is_llm() const override { return false; }
  Verdict judge(std::string_view prediction, std::string_view gold, std::string_view question) override;
};

/// Asks a chat model for a MATCH / NO_MATCH verdict. Gateway failures and
/// unreadable replies yield Verdict::unjudged.
class LlmJudge final : public Judge {
 public:
  explicit LlmJudge(ChatBackend& backend) : backend_(backend) {}

  std::string id() const override;
  bool is_llm() const override { return true; }
  Verdict judge(std::string_view prediction, std::string_view gold, std::string_view question) override;

 private:
  ChatBackend& backend_;
};

std::string build_judge_prompt(std::string_view prediction, std::string_view gold, std::string_view question);
/// MATCH / NO_MATCH (also YES / NO) at the start of the reply.
Verdict parse_judge_reply(std::string_view reply);

Verdict judge_exact_match(std::string_view prediction, std::string_view gold, std::string_view question,
                          Judge& judge);

/// Aggregates for one (conference, question type, retriever) cell.
struct EvalCell {
  std::string conference_id;
  std::string qtype;  // EA / EC / RA / RC
  RetrieverKind mode = RetrieverKind::dense_path;
  std::size_t n = 0;          // answered pairs
  double f1_mean = 0.0;       // 0..100
  std::size_t em_judged = 0;  // n minus unjudged
  std::size_t em_matches = 0;
  std::optional<double> em_mean;  // 0..100, empty when nothing was judged
  std::size_t recall_hits = 0;    // all source paths inside the top-k
  double retrieval_recall = 0.0;  // 0..100
};

/// Description-mode cell minus its path-mode counterpart.
struct EvalDelta {
  std::string conference_id;
  std::string qtype;
  RetrieverKind base = RetrieverKind::dense_path;
  RetrieverKind star = RetrieverKind::dense_description;
  double f1 = 0.0;
  std::optional<double> em;
  double retrieval_recall = 0.0;
};

struct EvalSummary {
  RetrieverKind mode = RetrieverKind::dense_path;
  std::size_t n = 0;
  double f1_mean = 0.0;
  std::size_t em_judged = 0;
  std::optional<double> em_mean;
  double retrieval_recall = 0.0;
};

struct EvalRecord {
  std::size_t pair_index = 0;
  RetrieverKind mode = RetrieverKind::dense_path;
  std::string answer;
  std::vector<std::string> retrieved;  // serialized, rank order
  double f1 = 0.0;                     // 0..1
  Verdict verdict = Verdict::unjudged;
  bool retrieval_hit = false;
};

struct EvalFailure {
  std::size_t pair_index = 0;
  RetrieverKind mode = RetrieverKind::dense_path;
  std::string kind;
  std::string message;
};

struct EvalReport {
  std::string judge_id;
  bool judge_is_llm = false;
  std::string generator_id;
  std::size_t k = kDefaultTopK;
  std::vector<RetrieverKind> modes;
  std::vector<EvalCell> cells;  // sorted by conference, qtype, mode order
  std::vector<EvalDelta> deltas;
  std::vector<EvalSummary> summary;
  std::vector<EvalRecord> records;  // pair order, then mode order
  std::vector<EvalFailure> failures;
};

struct EvalConfig {
  std::vector<RetrieverKind> modes{RetrieverKind::dense_path};
  RetrieverConfig retriever;  // k and BM25 parameters; retriever kind is taken from `modes`
  std::size_t max_in_flight = 4;
};

/// Answers every pair under every mode, scores F1 and exact match, and
/// aggregates per cell. A pair whose answer() throws is recorded in
/// `failures` and excluded from the cell counts.
EvalReport evaluate_dataset(std::span<const QAPair> pairs, const KnowledgeRegistry& knowledge,
                            const EvalConfig& config, ChatBackend& generator, EmbeddingBackend* embedder,
                            Judge& judge);

/// True when every source path of `pair` is among `retrieved` (serialized).
bool sources_retrieved(const QAPair& pair, std::span<const std::string> retrieved);

nlohmann::json to_json(const EvalReport& report);
/// Plain-text table: one row per conference and base mode, F1 then EM per
/// question type, STAR deltas written as +x.xx / -x.xx after the base value.
std::string render_table(const EvalReport& report);

}  // namespace starqa
