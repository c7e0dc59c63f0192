#include "starqa/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "starqa/errors.hpp"
#include "starqa/io.hpp"
#include "starqa/text.hpp"

namespace starqa {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "index files are little-endian float32");

namespace {

constexpr std::string_view kIndexFormat = "starqa-index/1";

double squared_norm(const EmbeddingVector& v) {
  double sum = 0.0;
  for (float x : v.values) sum += static_cast<double>(x) * static_cast<double>(x);
  return sum;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    sum += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  }
  return sum;
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

void check_finite(const EmbeddingVector& v) {
  for (float x : v.values) {
    if (!std::isfinite(x)) throw ValidationError("embedding has a non-finite component");
  }
}

}  // namespace

std::string_view to_string(RetrieverKind kind) {
  switch (kind) {
    case RetrieverKind::dense_path: return "dense_path";
    case RetrieverKind::dense_description: return "dense_description";
    case RetrieverKind::bm25_path: return "bm25_path";
    case RetrieverKind::bm25_description: return "bm25_description";
  }
  return "unknown";
}

RetrieverKind parse_retriever(std::string_view name) {
  for (auto kind : {RetrieverKind::dense_path, RetrieverKind::dense_description, RetrieverKind::bm25_path,
                    RetrieverKind::bm25_description}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown retriever '" + std::string(name) +
                    "' (expected dense_path, dense_description, bm25_path or bm25_description)");
}

bool uses_descriptions(RetrieverKind kind) noexcept {
  return kind == RetrieverKind::dense_description || kind == RetrieverKind::bm25_description;
}

std::string_view to_string(IndexMode mode) {
  return mode == IndexMode::path_text ? "path_text" : "description_text";
}

IndexMode parse_index_mode(std::string_view name) {
  if (name == "path_text") return IndexMode::path_text;
  if (name == "description_text") return IndexMode::description_text;
  throw ConfigError("unknown index mode '" + std::string(name) + "' (expected path_text or description_text)");
}

void RetrieverConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(bm25_k1 >= 0.0)) throw ConfigError("bm25_k1 must be >= 0");
  if (!(bm25_b >= 0.0 && bm25_b <= 1.0)) throw ConfigError("bm25_b must be in [0, 1]");
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("cosine of vectors with dims " + std::to_string(a.dim()) + " and " +
                          std::to_string(b.dim()));
  }
  const double na = squared_norm(a);
  const double nb = squared_norm(b);
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine of an all-zero vector");
  return clamp_unit(dot(a, b) / (std::sqrt(na) * std::sqrt(nb)));
}

std::vector<IndexText> path_texts(const PathCorpus& corpus) {
  std::vector<IndexText> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.paths()) out.push_back({p.id(), p.serialized()});
  return out;
}

std::vector<IndexText> description_texts(const PathCorpus& corpus, const DescriptionStore& store) {
  std::vector<IndexText> out;
  std::vector<std::string> missing;
  out.reserve(corpus.size());
  for (const auto& p : corpus.paths()) {
    if (auto it = store.entries.find(p.id()); it != store.entries.end()) {
      out.push_back({p.id(), it->second.text});
    } else {
      missing.push_back(p.id());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw NotFoundError("description store lacks " + std::to_string(missing.size()) + " path(s): " + list);
  }
  return out;
}

VectorIndex::VectorIndex(IndexMode mode, std::string embedder_id, std::string corpus_hash,
                         std::vector<std::string> ids, std::vector<EmbeddingVector> vectors)
    : mode_(mode),
      embedder_id_(std::move(embedder_id)),
      corpus_hash_(std::move(corpus_hash)),
      ids_(std::move(ids)),
      vectors_(std::move(vectors)) {
  if (ids_.size() != vectors_.size()) throw ValidationError("index ids and vectors differ in length");
  dim_ = vectors_.empty() ? 0 : vectors_.front().dim();
  norms_.reserve(vectors_.size());
  for (const auto& v : vectors_) {
    if (v.dim() != dim_ || dim_ == 0) throw ValidationError("index vectors must share one positive dimension");
    check_finite(v);
    norms_.push_back(std::sqrt(squared_norm(v)));
  }
}

std::vector<double> VectorIndex::scores(const EmbeddingVector& query) const {
  if (query.dim() != dim_) {
    throw MismatchError("query embedding has dim " + std::to_string(query.dim()) + ", index has " +
                        std::to_string(dim_));
  }
  check_finite(query);
  std::vector<double> out(vectors_.size(), 0.0);
  const double query_norm = std::sqrt(squared_norm(query));
  if (query_norm == 0.0) return out;
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (norms_[i] == 0.0) continue;
    out[i] = clamp_unit(dot(query, vectors_[i]) / (query_norm * norms_[i]));
  }
  return out;
}

VectorIndex build_index(std::span<const IndexText> texts, EmbeddingBackend& embedder, IndexMode mode,
                        std::string corpus_hash, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vectors;
  ids.reserve(texts.size());
  vectors.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += batch_size) {
    const auto end = std::min(texts.size(), begin + batch_size);
    std::vector<std::string> batch;
    batch.reserve(end - begin);
    for (auto i = begin; i < end; ++i) batch.push_back(texts[i].text);
    auto embedded = embedder.embed(batch);
    if (embedded.size() != batch.size()) {
      throw GatewayError("embedder returned " + std::to_string(embedded.size()) + " vectors for " +
                         std::to_string(batch.size()) + " texts");
    }
    for (std::size_t j = 0; j < embedded.size(); ++j) {
      if (!vectors.empty() && embedded[j].dim() != vectors.front().dim()) {
        throw GatewayError("embedding dimension drift: " + std::to_string(vectors.front().dim()) + " then " +
                           std::to_string(embedded[j].dim()));
      }
      ids.push_back(texts[begin + j].path_id);
      vectors.push_back(std::move(embedded[j]));
    }
  }
  return VectorIndex(mode, embedder.embedder_id(), std::move(corpus_hash), std::move(ids), std::move(vectors));
}

void save_index(const VectorIndex& index, const std::filesystem::path& file) {
  const json header{{"format", kIndexFormat},
                    {"mode", to_string(index.mode())},
                    {"embedder_id", index.embedder_id()},
                    {"dim", index.dim()},
                    {"count", index.size()},
                    {"corpus_hash", index.corpus_hash()},
                    {"ids", index.ids()}};
  std::string out = header.dump() + "\n";
  const auto payload_start = out.size();
  out.resize(payload_start + index.size() * index.dim() * sizeof(float));
  char* cursor = out.data() + payload_start;
  for (const auto& v : index.vectors()) {
    std::memcpy(cursor, v.values.data(), v.values.size() * sizeof(float));
    cursor += v.values.size() * sizeof(float);
  }
  io::write_file_atomic(file, out);
}

VectorIndex load_index(const std::filesystem::path& file, const PathCorpus& corpus) {
  const auto content = io::read_file(file);
  const auto newline = content.find('\n');
  if (newline == std::string::npos) throw CorruptFileError("index file has no header: " + file.string());
  json header;
  try {
    header = json::parse(content.substr(0, newline));
  } catch (const json::exception& e) {
    throw CorruptFileError("bad index header in " + file.string() + ": " + e.what());
  }
  if (header.value("format", "") != kIndexFormat) throw CorruptFileError("not an index file: " + file.string());
  const auto dim = header.at("dim").get<std::size_t>();
  const auto count = header.at("count").get<std::size_t>();
  auto ids = header.at("ids").get<std::vector<std::string>>();
  const auto corpus_hash = header.at("corpus_hash").get<std::string>();
  if (corpus_hash != corpus.content_hash()) {
    throw MismatchError("index " + file.string() + " was built for corpus " + corpus_hash.substr(0, 12) +
                        ", current corpus is " + corpus.content_hash().substr(0, 12));
  }
  if (ids.size() != count || content.size() - newline - 1 != count * dim * sizeof(float)) {
    throw CorruptFileError("index payload size mismatch in " + file.string());
  }
  std::vector<EmbeddingVector> vectors(count, EmbeddingVector{std::vector<float>(dim)});
  const char* cursor = content.data() + newline + 1;
  for (auto& v : vectors) {
    std::memcpy(v.values.data(), cursor, dim * sizeof(float));
    cursor += dim * sizeof(float);
  }
  for (const auto& id : ids) {
    if (corpus.find(id) == nullptr) throw MismatchError("index entry " + id + " is not in the corpus");
  }
  return VectorIndex(parse_index_mode(header.at("mode").get<std::string>()),
                     header.at("embedder_id").get<std::string>(), corpus_hash, std::move(ids), std::move(vectors));
}

std::vector<ScoredPath> select_top_k(std::span<const double> scores, std::span<const std::string> ids,
                                     const PathCorpus& corpus, std::size_t k) {
  std::vector<const KnowledgePath*> paths(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    paths[i] = corpus.find(ids[i]);
    if (paths[i] == nullptr) throw NotFoundError("path id " + ids[i] + " is not in the corpus");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return paths[a]->serialized() < paths[b]->serialized();
                    });
  std::vector<ScoredPath> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({*paths[order[i]], scores[order[i]]});
  return out;
}

namespace {

RetrievalResult dense_topk(std::string_view query, const VectorIndex& index, const PathCorpus& corpus,
                           EmbeddingBackend& embedder, const RetrieverConfig& config) {
  config.validate();
  if (index.empty()) throw NotFoundError("vector index is empty");
  if (embedder.embedder_id() != index.embedder_id()) {
    throw MismatchError("index was built with embedder '" + index.embedder_id() + "', query embedder is '" +
                        embedder.embedder_id() + "'");
  }
  if (index.corpus_hash() != corpus.content_hash()) throw MismatchError("vector index belongs to another corpus");
  const std::string q(query);
  const auto embedded = embedder.embed(std::span<const std::string>(&q, 1));
  if (embedded.size() != 1) throw GatewayError("embedder returned no vector for the query");
  const auto scores = index.scores(embedded.front());
  return RetrievalResult{q, select_top_k(scores, index.ids(), corpus, config.k), config};
}

}  // namespace

RetrievalResult retrieve_paths(std::string_view query, const VectorIndex& index, const PathCorpus& corpus,
                               EmbeddingBackend& embedder, const RetrieverConfig& config) {
  if (index.mode() != IndexMode::path_text) throw MismatchError("path retrieval needs a path_text index");
  return dense_topk(query, index, corpus, embedder, config);
}

RetrievalResult retrieve_descriptions(std::string_view query, const VectorIndex& index, const PathCorpus& corpus,
                                      const DescriptionStore& store, EmbeddingBackend& embedder,
                                      const RetrieverConfig& config) {
  if (index.mode() != IndexMode::description_text) {
    throw MismatchError("description retrieval needs a description_text index");
  }
  std::vector<std::string> missing;
  for (const auto& id : index.ids()) {
    if (!store.entries.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw NotFoundError("no description for indexed path(s): " + list);
  }
  return dense_topk(query, index, corpus, embedder, config);
}

Bm25Index::Bm25Index(std::span<const IndexText> documents) {
  ids_.reserve(documents.size());
  term_counts_.reserve(documents.size());
  lengths_.reserve(documents.size());
  std::size_t total = 0;
  for (const auto& doc : documents) {
    ids_.push_back(doc.path_id);
    std::unordered_map<std::string, std::size_t> counts;
    const auto tokens = text::tokenize_path_text(doc.text);
    for (const auto& token : tokens) ++counts[token];
    for (const auto& [term, n] : counts) ++document_frequency_[term];
    lengths_.push_back(tokens.size());
    total += tokens.size();
    term_counts_.push_back(std::move(counts));
  }
  avg_length_ = documents.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(documents.size());
}

std::vector<double> Bm25Index::scores(std::string_view query, double k1, double b) const {
  std::vector<double> out(ids_.size(), 0.0);
  const double n = static_cast<double>(ids_.size());
  for (const auto& term : text::tokenize_path_text(query)) {
    const auto df_it = document_frequency_.find(term);
    if (df_it == document_frequency_.end()) continue;
    const double df = static_cast<double>(df_it->second);
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const auto tf_it = term_counts_[i].find(term);
      if (tf_it == term_counts_[i].end()) continue;
      const double tf = static_cast<double>(tf_it->second);
      const double length_ratio = avg_length_ > 0.0 ? static_cast<double>(lengths_[i]) / avg_length_ : 0.0;
      out[i] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * length_ratio));
    }
  }
  return out;
}

RetrievalResult bm25_topk(std::string_view query, const Bm25Index& index, const PathCorpus& corpus,
                          const RetrieverConfig& config) {
  config.validate();
  if (index.size() == 0) throw NotFoundError("BM25 corpus is empty");
  const auto scores = index.scores(query, config.bm25_k1, config.bm25_b);
  return RetrievalResult{std::string(query), select_top_k(scores, index.ids(), corpus, config.k), config};
}

RetrievalResult bm25_topk(std::string_view query, std::span<const IndexText> documents, const PathCorpus& corpus,
                          const RetrieverConfig& config) {
  if (documents.empty()) throw NotFoundError("BM25 corpus is empty");
  return bm25_topk(query, Bm25Index(documents), corpus, config);
}

void ConferenceKnowledge::prepare_lexical() {
  const auto paths = path_texts(corpus);
  bm25_paths.emplace(paths);
  if (store) {
    const auto descriptions = description_texts(corpus, *store);
    bm25_descriptions.emplace(descriptions);
  }
}

RetrievalResult retrieve(std::string_view query, const ConferenceKnowledge& knowledge, EmbeddingBackend* embedder,
                         const RetrieverConfig& config) {
  const auto need_embedder = [&]() -> EmbeddingBackend& {
    if (embedder == nullptr) throw ConfigError(std::string(to_string(config.retriever)) + " needs an embedder");
    return *embedder;
  };
  switch (config.retriever) {
    case RetrieverKind::dense_path:
      if (!knowledge.path_index) throw ConfigError("no path_text index for " + knowledge.corpus.conference_id());
      return retrieve_paths(query, *knowledge.path_index, knowledge.corpus, need_embedder(), config);
    case RetrieverKind::dense_description:
      if (!knowledge.store) throw ConfigError("no description store for " + knowledge.corpus.conference_id());
      if (!knowledge.description_index) {
        throw ConfigError("no description_text index for " + knowledge.corpus.conference_id());
      }
      return retrieve_descriptions(query, *knowledge.description_index, knowledge.corpus, *knowledge.store,
                                   need_embedder(), config);
    case RetrieverKind::bm25_path:
      if (knowledge.bm25_paths) return bm25_topk(query, *knowledge.bm25_paths, knowledge.corpus, config);
      return bm25_topk(query, path_texts(knowledge.corpus), knowledge.corpus, config);
    case RetrieverKind::bm25_description: {
      if (!knowledge.store) throw ConfigError("no description store for " + knowledge.corpus.conference_id());
      if (knowledge.bm25_descriptions) {
        return bm25_topk(query, *knowledge.bm25_descriptions, knowledge.corpus, config);
      }
      return bm25_topk(query, description_texts(knowledge.corpus, *knowledge.store), knowledge.corpus, config);
    }
  }
  throw ConfigError("unhandled retriever");
}

}  // namespace starqa
