#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "starqa/describer.hpp"
#include "starqa/gateway.hpp"
#include "starqa/path.hpp"

namespace starqa {

inline constexpr std::size_t kDefaultTopK = 5;

enum class RetrieverKind { dense_path, dense_description, bm25_path, bm25_description };

std::string_view to_string(RetrieverKind kind);
/// Throws ConfigError for unknown names.
RetrieverKind parse_retriever(std::string_view name);
bool uses_descriptions(RetrieverKind kind) noexcept;

enum class IndexMode { path_text, description_text };

std::string_view to_string(IndexMode mode);
IndexMode parse_index_mode(std::string_view name);

struct RetrieverConfig {
  std::size_t k = kDefaultTopK;
  RetrieverKind retriever = RetrieverKind::dense_path;
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;

  void validate() const;
  bool operator==(const RetrieverConfig&) const = default;
};

struct ScoredPath {
  KnowledgePath path;
  double score = 0.0;
};

/// Ranked paths for one query. Scores are non-increasing; equal scores are
/// ordered by serialized path, ascending.
struct RetrievalResult {
  std::string query;
  std::vector<ScoredPath> ranked;
  RetrieverConfig config;
};

/// Cosine similarity in double precision: dot / (sqrt(|a|^2) * sqrt(|b|^2)),
/// clamped to [-1, 1]. Throws ValidationError on a dimension mismatch or an
/// all-zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct IndexText {
  std::string path_id;
  std::string text;
};

/// (path id, serialized path) for every path, in corpus order.
std::vector<IndexText> path_texts(const PathCorpus& corpus);

/// (path id, description) for every path, in corpus order. Throws
/// NotFoundError listing every path id the store lacks.
std::vector<IndexText> description_texts(const PathCorpus& corpus, const DescriptionStore& store);

/// Exhaustive (exact) dense index over one corpus. Immutable.
class VectorIndex {
 public:
  VectorIndex() = default;
  VectorIndex(IndexMode mode, std::string embedder_id, std::string corpus_hash, std::vector<std::string> ids,
              std::vector<EmbeddingVector> vectors);

  IndexMode mode() const noexcept { return mode_; }
  const std::string& embedder_id() const noexcept { return embedder_id_; }
  const std::string& corpus_hash() const noexcept { return corpus_hash_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<EmbeddingVector>& vectors() const noexcept { return vectors_; }

  /// Cosine of `query` against every entry, in index order. Entries with a
  /// zero vector, and every entry when the query is zero, score 0.
  std::vector<double> scores(const EmbeddingVector& query) const;

 private:
  IndexMode mode_ = IndexMode::path_text;
  std::string embedder_id_;
  std::string corpus_hash_;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<EmbeddingVector> vectors_;
  std::vector<double> norms_;
};

/// Embeds `texts` in batches of `batch_size` and assembles vectors in input
/// order. Throws GatewayError if batches disagree on dimension.
VectorIndex build_index(std::span<const IndexText> texts, EmbeddingBackend& embedder, IndexMode mode,
                        std::string corpus_hash, std::size_t batch_size = 64);

/// Index file: one JSON header line {format, mode, embedder_id, dim, count,
/// corpus_hash, ids} followed by count*dim little-endian float32 values.
void save_index(const VectorIndex& index, const std::filesystem::path& file);
/// Refuses (MismatchError) an index built over a different corpus.
VectorIndex load_index(const std::filesystem::path& file, const PathCorpus& corpus);

/// Top-k of (score, path) pairs under the documented order. `ids[i]` scores
/// `scores[i]`; every id must be in `corpus`.
std::vector<ScoredPath> select_top_k(std::span<const double> scores, std::span<const std::string> ids,
                                     const PathCorpus& corpus, std::size_t k);

/// Cosine top-k between the query and path-text embeddings.
RetrievalResult retrieve_paths(std::string_view query, const VectorIndex& index, const PathCorpus& corpus,
                               EmbeddingBackend& embedder, const RetrieverConfig& config);

/// Cosine top-k between the query and description embeddings; returns the
/// described paths, never the description text.
RetrievalResult retrieve_descriptions(std::string_view query, const VectorIndex& index, const PathCorpus& corpus,
                                      const DescriptionStore& store, EmbeddingBackend& embedder,
                                      const RetrieverConfig& config);

/// Okapi BM25 over a fixed document set, idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
/// Tokenization treats ">>" as whitespace. Each query token occurrence
/// contributes, so a repeated query term counts repeatedly.
class Bm25Index {
 public:
  explicit Bm25Index(std::span<const IndexText> documents);

  std::vector<double> scores(std::string_view query, double k1, double b) const;
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t size() const noexcept { return ids_.size(); }
  double avg_length() const noexcept { return avg_length_; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::unordered_map<std::string, std::size_t>> term_counts_;
  std::vector<std::size_t> lengths_;
  std::unordered_map<std::string, std::size_t> document_frequency_;
  double avg_length_ = 0.0;
};

RetrievalResult bm25_topk(std::string_view query, const Bm25Index& index, const PathCorpus& corpus,
                          const RetrieverConfig& config);

/// Convenience overload that indexes `documents` on the fly.
RetrievalResult bm25_topk(std::string_view query, std::span<const IndexText> documents, const PathCorpus& corpus,
                          const RetrieverConfig& config);

/// Everything retrievable for one conference. Dense indexes and the store
/// are optional; a retriever that needs a missing piece fails with
/// ConfigError.
struct ConferenceKnowledge {
  PathCorpus corpus;
  std::optional<DescriptionStore> store;
  std::optional<VectorIndex> path_index;
  std::optional<VectorIndex> description_index;
  std::optional<Bm25Index> bm25_paths;
  std::optional<Bm25Index> bm25_descriptions;

  /// Builds the BM25 indexes from the corpus (and store, when present).
  void prepare_lexical();
};

/// Dispatches on config.retriever. `embedder` is required for dense modes.
RetrievalResult retrieve(std::string_view query, const ConferenceKnowledge& knowledge, EmbeddingBackend* embedder,
                         const RetrieverConfig& config);

}  // namespace starqa
