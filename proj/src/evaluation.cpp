#include "starqa/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "starqa/errors.hpp"
#include "starqa/io.hpp"
#include "starqa/text.hpp"

namespace starqa {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Question types and QA pairs

std::string QuestionType::code() const {
  std::string out;
  out.push_back(origin == AnswerOrigin::extraction ? 'E' : 'R');
  out.push_back(support == PathSupport::atomic ? 'A' : 'C');
  return out;
}

QuestionType QuestionType::parse(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(c)));
  }
  static const std::map<std::string, QuestionType> kNames = {
      {"ea", {AnswerOrigin::extraction, PathSupport::atomic}},
      {"ec", {AnswerOrigin::extraction, PathSupport::complex}},
      {"ra", {AnswerOrigin::reasoning, PathSupport::atomic}},
      {"rc", {AnswerOrigin::reasoning, PathSupport::complex}},
      {"extractionatomic", {AnswerOrigin::extraction, PathSupport::atomic}},
      {"extractioncomplex", {AnswerOrigin::extraction, PathSupport::complex}},
      {"reasoningatomic", {AnswerOrigin::reasoning, PathSupport::atomic}},
      {"reasoningcomplex", {AnswerOrigin::reasoning, PathSupport::complex}},
  };
  const auto it = kNames.find(key);
  if (it == kNames.end()) throw ValidationError("unknown question type '" + std::string(text) + "'");
  return it->second;
}

void QAPair::validate() const {
  if (text::trim(question).empty()) throw ValidationError("QA pair with empty question");
  if (answer_source_paths.empty()) throw ValidationError("QA pair without source paths: " + question);
  for (const auto& p : answer_source_paths) {
    try {
      starqa::parse(p);
    } catch (const Error& e) {
      throw ValidationError("QA pair source path is invalid (" + std::string(e.what()) + "): " + question);
    }
  }
  const bool atomic = qtype.support == PathSupport::atomic;
  if (atomic && answer_source_paths.size() != 1) {
    throw ValidationError("atomic QA pair must have exactly one source path: " + question);
  }
  if (!atomic && answer_source_paths.size() < 2) {
    throw ValidationError("complex QA pair needs more than one source path: " + question);
  }
}

namespace {

const json* field(const json& record, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (auto it = record.find(name); it != record.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

QAPair pair_from_json(const json& record) {
  if (!record.is_object()) throw ParseError("QA record must be an object");
  QAPair pair;
  const auto* question = field(record, {"question"});
  const auto* gold = field(record, {"gold_answer", "answer"});
  const auto* sources = field(record, {"answer_source_paths", "sources", "source", "paths", "path"});
  const auto* qtype = field(record, {"qtype", "type", "question_type"});
  const auto* conference = field(record, {"conference", "conference_id"});
  if (!question || !gold || !sources || !qtype || !conference) {
    throw ParseError("QA record lacks one of question, gold_answer, answer_source_paths, qtype, conference");
  }
  pair.question = question->get<std::string>();
  pair.gold_answer = gold->is_string() ? gold->get<std::string>() : gold->dump();
  if (sources->is_string()) {
    pair.answer_source_paths.push_back(sources->get<std::string>());
  } else {
    pair.answer_source_paths = sources->get<std::vector<std::string>>();
  }
  pair.qtype = QuestionType::parse(qtype->get<std::string>());
  pair.conference_id = conference->get<std::string>();
  pair.validate();
  return pair;
}

}  // namespace

std::vector<QAPair> parse_pairs(std::string_view content) {
  std::vector<QAPair> pairs;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return pairs;
  try {
    if (content[first] == '[') {
      for (const auto& record : json::parse(content)) pairs.push_back(pair_from_json(record));
      return pairs;
    }
    std::size_t line_no = 0;
    for (std::size_t start = 0; start < content.size();) {
      auto end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      ++line_no;
      const auto line = text::trim(content.substr(start, end - start));
      start = end + 1;
      if (line.empty()) continue;
      try {
        pairs.push_back(pair_from_json(json::parse(line)));
      } catch (const Error& e) {
        throw ValidationError("QA pairs line " + std::to_string(line_no) + ": " + e.what());
      } catch (const json::exception& e) {
        throw ParseError("QA pairs line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed QA pairs file: ") + e.what());
  }
  return pairs;
}

std::vector<QAPair> load_pairs_file(const std::filesystem::path& file) { return parse_pairs(io::read_file(file)); }

json to_json(const QAPair& pair) {
  return json{{"question", pair.question},
              {"gold_answer", pair.gold_answer},
              {"answer_source_paths", pair.answer_source_paths},
              {"qtype", pair.qtype.code()},
              {"conference", pair.conference_id}};
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<std::string> tokenize(std::string_view input) { return text::tokenize(input); }

double token_f1(std::string_view prediction, std::string_view gold) {
  const auto pred_tokens = tokenize(prediction);
  const auto gold_tokens = tokenize(gold);
  if (pred_tokens.empty() || gold_tokens.empty()) return pred_tokens.empty() && gold_tokens.empty() ? 1.0 : 0.0;

  std::unordered_map<std::string_view, std::size_t> gold_counts;
  for (const auto& t : gold_tokens) ++gold_counts[t];
  std::size_t common = 0;
  for (const auto& t : pred_tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred_tokens.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold_tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::match: return "match";
    case Verdict::no_match: return "no_match";
    case Verdict::unjudged: return "unjudged";
  }
  return "unjudged";
}

Verdict FallbackJudge::judge(std::string_view prediction, std::string_view gold, std::string_view) {
  const auto pred_tokens = tokenize(prediction);
  const auto gold_tokens = tokenize(gold);
  if (gold_tokens.empty()) return pred_tokens.empty() ? Verdict::match : Verdict::no_match;
  const bool contained =
      std::search(pred_tokens.begin(), pred_tokens.end(), gold_tokens.begin(), gold_tokens.end()) != pred_tokens.end();
  if (contained || token_f1(prediction, gold) >= 0.99) return Verdict::match;
  return Verdict::no_match;
}

std::string build_judge_prompt(std::string_view prediction, std::string_view gold, std::string_view question) {
  std::string prompt;
  prompt += "Question: " + std::string(question) + "\n";
  prompt += "Gold answer: " + std::string(gold) + "\n";
  prompt += "Predicted answer: " + std::string(prediction) + "\n\n";
  prompt +=
      "Does the predicted answer exactly match the gold answer? Differences in wording, formatting, or "
      "units that keep the same meaning still count as a match. Reply with one word: MATCH or NO_MATCH.";
  return prompt;
}

Verdict parse_judge_reply(std::string_view reply) {
  std::string head;
  for (char c : text::trim(reply)) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ' ') {
      head.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    } else {
      break;
    }
  }
  if (head.rfind("NO_MATCH", 0) == 0 || head.rfind("NO MATCH", 0) == 0 || head == "NO" || head.rfind("NO ", 0) == 0) {
    return Verdict::no_match;
  }
  if (head.rfind("MATCH", 0) == 0 || head.rfind("YES", 0) == 0) return Verdict::match;
  return Verdict::unjudged;
}

std::string LlmJudge::id() const { return "llm:" + backend_.model_id() + "/" + std::string(kJudgePromptVersion); }

Verdict LlmJudge::judge(std::string_view prediction, std::string_view gold, std::string_view question) {
  const std::vector<ChatMessage> messages{
      {"system", "You grade answers to questions about academic conferences."},
      {"user", build_judge_prompt(prediction, gold, question)}};
  try {
    return parse_judge_reply(backend_.chat(messages, ChatParams{}));
  } catch (const GatewayError&) {
    return Verdict::unjudged;
  }
}

Verdict judge_exact_match(std::string_view prediction, std::string_view gold, std::string_view question,
                          Judge& judge) {
  return judge.judge(prediction, gold, question);
}

bool sources_retrieved(const QAPair& pair, std::span<const std::string> retrieved) {
  return std::all_of(pair.answer_source_paths.begin(), pair.answer_source_paths.end(), [&](const std::string& p) {
    return std::find(retrieved.begin(), retrieved.end(), p) != retrieved.end();
  });
}

// ---------------------------------------------------------------------------
// Dataset evaluation

namespace {

const std::vector<std::string>& qtype_order() {
  static const std::vector<std::string> kOrder{"EA", "EC", "RA", "RC"};
  return kOrder;
}

std::size_t qtype_rank(const std::string& code) {
  const auto& order = qtype_order();
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), code) - order.begin());
}

// Sorting before summing keeps means independent of record order.
double sorted_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

struct Accumulator {
  std::vector<double> f1;
  std::size_t judged = 0;
  std::size_t matches = 0;
  std::size_t hits = 0;

  void add(const EvalRecord& r) {
    f1.push_back(r.f1);
    if (r.verdict != Verdict::unjudged) ++judged;
    if (r.verdict == Verdict::match) ++matches;
    if (r.retrieval_hit) ++hits;
  }
  std::optional<double> em() const {
    if (judged == 0) return std::nullopt;
    return 100.0 * static_cast<double>(matches) / static_cast<double>(judged);
  }
  double recall() const {
    return f1.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(f1.size());
  }
};

std::optional<RetrieverKind> star_counterpart(RetrieverKind base) {
  if (base == RetrieverKind::dense_path) return RetrieverKind::dense_description;
  if (base == RetrieverKind::bm25_path) return RetrieverKind::bm25_description;
  return std::nullopt;
}

}  // namespace

EvalReport evaluate_dataset(std::span<const QAPair> pairs, const KnowledgeRegistry& knowledge,
                            const EvalConfig& config, ChatBackend& generator, EmbeddingBackend* embedder,
                            Judge& judge) {
  config.retriever.validate();
  EvalReport report;
  report.judge_id = judge.id();
  report.judge_is_llm = judge.is_llm();
  report.generator_id = generator.model_id();
  report.k = config.retriever.k;
  report.modes = config.modes;

  const std::size_t job_count = pairs.size() * config.modes.size();
  std::vector<std::optional<EvalRecord>> results(job_count);
  std::vector<std::optional<EvalFailure>> failures(job_count);

  auto run = [&](std::size_t job) {
    const auto pair_index = job / config.modes.size();
    const auto mode = config.modes[job % config.modes.size()];
    const auto& pair = pairs[pair_index];
    try {
      auto retriever = config.retriever;
      retriever.retriever = mode;
      const auto record = answer(Query{pair.question, pair.conference_id}, knowledge, retriever, generator, embedder);
      EvalRecord r;
      r.pair_index = pair_index;
      r.mode = mode;
      r.answer = record.answer;
      for (const auto& item : record.retrieved.ranked) r.retrieved.push_back(item.path.serialized());
      r.f1 = token_f1(record.answer, pair.gold_answer);
      r.verdict = judge_exact_match(record.answer, pair.gold_answer, pair.question, judge);
      r.retrieval_hit = sources_retrieved(pair, r.retrieved);
      results[job] = std::move(r);
    } catch (const Error& e) {
      failures[job] = EvalFailure{pair_index, mode, e.kind(), e.what()};
    } catch (const std::exception& e) {
      failures[job] = EvalFailure{pair_index, mode, "internal", e.what()};
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto job = next.fetch_add(1); job < job_count; job = next.fetch_add(1)) run(job);
  };
  const auto threads_wanted = std::min(std::max<std::size_t>(1, config.max_in_flight), job_count);
  if (threads_wanted <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < threads_wanted; ++t) threads.emplace_back(worker);
  }

  using CellKey = std::tuple<std::string, std::size_t, std::size_t>;  // conference, qtype rank, mode position
  std::map<CellKey, Accumulator> cells;
  std::map<std::size_t, Accumulator> per_mode;
  for (std::size_t job = 0; job < job_count; ++job) {
    if (failures[job]) report.failures.push_back(*failures[job]);
    if (!results[job]) continue;
    const auto& r = *results[job];
    const auto& pair = pairs[r.pair_index];
    const auto mode_pos = job % config.modes.size();
    cells[{pair.conference_id, qtype_rank(pair.qtype.code()), mode_pos}].add(r);
    per_mode[mode_pos].add(r);
    report.records.push_back(r);
  }

  for (const auto& [key, acc] : cells) {
    const auto& [conference, qrank, mode_pos] = key;
    EvalCell cell;
    cell.conference_id = conference;
    cell.qtype = qtype_order()[qrank];
    cell.mode = config.modes[mode_pos];
    cell.n = acc.f1.size();
    cell.f1_mean = 100.0 * sorted_mean(acc.f1);
    cell.em_judged = acc.judged;
    cell.em_matches = acc.matches;
    cell.em_mean = acc.em();
    cell.recall_hits = acc.hits;
    cell.retrieval_recall = acc.recall();
    report.cells.push_back(std::move(cell));
  }

  for (std::size_t pos = 0; pos < config.modes.size(); ++pos) {
    EvalSummary s;
    s.mode = config.modes[pos];
    if (auto it = per_mode.find(pos); it != per_mode.end()) {
      s.n = it->second.f1.size();
      s.f1_mean = 100.0 * sorted_mean(it->second.f1);
      s.em_judged = it->second.judged;
      s.em_mean = it->second.em();
      s.retrieval_recall = it->second.recall();
    }
    report.summary.push_back(s);
  }

  auto find_cell = [&](const std::string& conf, const std::string& qtype, RetrieverKind mode) -> const EvalCell* {
    for (const auto& c : report.cells) {
      if (c.conference_id == conf && c.qtype == qtype && c.mode == mode) return &c;
    }
    return nullptr;
  };
  for (const auto& base_cell : report.cells) {
    const auto star = star_counterpart(base_cell.mode);
    if (!star) continue;
    const auto* star_cell = find_cell(base_cell.conference_id, base_cell.qtype, *star);
    if (star_cell == nullptr) continue;
    EvalDelta d;
    d.conference_id = base_cell.conference_id;
    d.qtype = base_cell.qtype;
    d.base = base_cell.mode;
    d.star = *star;
    d.f1 = star_cell->f1_mean - base_cell.f1_mean;
    if (star_cell->em_mean && base_cell.em_mean) d.em = *star_cell->em_mean - *base_cell.em_mean;
    d.retrieval_recall = star_cell->retrieval_recall - base_cell.retrieval_recall;
    report.deltas.push_back(d);
  }
  return report;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string signed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

json to_json(const EvalReport& report) {
  json modes = json::array();
  for (auto m : report.modes) modes.push_back(to_string(m));
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"conference", c.conference_id},
                     {"qtype", c.qtype},
                     {"mode", to_string(c.mode)},
                     {"n", c.n},
                     {"f1_mean", c.f1_mean},
                     {"em_judged", c.em_judged},
                     {"em_matches", c.em_matches},
                     {"em_mean", optional_number(c.em_mean)},
                     {"recall_hits", c.recall_hits},
                     {"retrieval_recall", c.retrieval_recall}});
  }
  json deltas = json::array();
  for (const auto& d : report.deltas) {
    deltas.push_back({{"conference", d.conference_id},
                      {"qtype", d.qtype},
                      {"base", to_string(d.base)},
                      {"star", to_string(d.star)},
                      {"f1", d.f1},
                      {"em", optional_number(d.em)},
                      {"retrieval_recall", d.retrieval_recall}});
  }
  json summary = json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"mode", to_string(s.mode)},
                       {"n", s.n},
                       {"f1_mean", s.f1_mean},
                       {"em_judged", s.em_judged},
                       {"em_mean", optional_number(s.em_mean)},
                       {"retrieval_recall", s.retrieval_recall}});
  }
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"pair", r.pair_index},
                       {"mode", to_string(r.mode)},
                       {"answer", r.answer},
                       {"retrieved", r.retrieved},
                       {"f1", r.f1},
                       {"verdict", to_string(r.verdict)},
                       {"retrieval_hit", r.retrieval_hit}});
  }
  json failures = json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"pair", f.pair_index}, {"mode", to_string(f.mode)}, {"kind", f.kind}, {"message", f.message}});
  }
  return json{{"judge", {{"id", report.judge_id}, {"kind", report.judge_is_llm ? "llm" : "fallback"}}},
              {"generator", report.generator_id},
              {"k", report.k},
              {"modes", std::move(modes)},
              {"cells", std::move(cells)},
              {"deltas", std::move(deltas)},
              {"summary", std::move(summary)},
              {"records", std::move(records)},
              {"failures", std::move(failures)}};
}

std::string render_table(const EvalReport& report) {
  const auto em_label = report.judge_is_llm ? std::string("EM-LLM") : std::string("EM-fallback");
  std::string out;
  out += "judge: " + report.judge_id + "  generator: " + report.generator_id + "  k=" + std::to_string(report.k) + "\n";

  std::vector<std::string> conferences;
  for (const auto& c : report.cells) {
    if (std::find(conferences.begin(), conferences.end(), c.conference_id) == conferences.end()) {
      conferences.push_back(c.conference_id);
    }
  }
  constexpr std::size_t kLabel = 36;
  constexpr std::size_t kValue = 15;
  std::string header = pad("conference / retriever", kLabel) + "|";
  for (const auto& q : qtype_order()) header += pad(" F1 " + q, kValue);
  header += "|";
  for (const auto& q : qtype_order()) header += pad(" " + em_label + " " + q, kValue);
  header += "| recall@" + std::to_string(report.k);
  out += header + "\n" + std::string(header.size(), '-') + "\n";

  for (const auto& conference : conferences) {
    for (auto mode : report.modes) {
      std::string row = pad(conference + " / " + std::string(to_string(mode)), kLabel) + "|";
      std::string em_part = "|";
      std::size_t n = 0, hits = 0;
      for (const auto& q : qtype_order()) {
        const EvalCell* cell = nullptr;
        const EvalDelta* delta = nullptr;
        for (const auto& c : report.cells) {
          if (c.conference_id == conference && c.qtype == q && c.mode == mode) cell = &c;
        }
        for (const auto& d : report.deltas) {
          if (d.conference_id == conference && d.qtype == q && d.star == mode) delta = &d;
        }
        if (cell == nullptr) {
          row += pad(" -", kValue);
          em_part += pad(" -", kValue);
          continue;
        }
        n += cell->n;
        hits += cell->recall_hits;
        std::string f1 = " " + fixed2(cell->f1_mean);
        std::string em = " " + (cell->em_mean ? fixed2(*cell->em_mean) : std::string("-"));
        if (delta != nullptr) {
          f1 += " (" + signed2(delta->f1) + ")";
          if (delta->em) em += " (" + signed2(*delta->em) + ")";
        }
        row += pad(f1, kValue);
        em_part += pad(em, kValue);
      }
      row += em_part + "| ";
      row += n == 0 ? std::string("-") : fixed2(100.0 * static_cast<double>(hits) / static_cast<double>(n));
      out += row + "\n";
    }
  }
  if (!report.failures.empty()) out += std::to_string(report.failures.size()) + " failed answer(s); see report JSON\n";
  return out;
}

}  // namespace starqa
