#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "starqa/tree.hpp"

namespace starqa {

/// Root-to-leaf (or root-to-node) label chain. The id is a content hash of
/// the serialized form, so equal label chains have equal ids.
class KnowledgePath {
 public:
  KnowledgePath() = default;
  explicit KnowledgePath(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& id() const noexcept { return id_; }
  const std::string& serialized() const noexcept { return serialized_; }
  const std::string& leaf() const noexcept { return labels_.back(); }
  std::size_t size() const noexcept { return labels_.size(); }

  bool operator==(const KnowledgePath& other) const noexcept { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::string serialized_;
  std::string id_;
};

/// Labels joined by ">>", no padding.
std::string serialize(std::span<const std::string> labels);
inline std::string serialize(const KnowledgePath& path) { return path.serialized(); }

/// Inverse of serialize(). Rejects empty input, empty segments and
/// leading/trailing separators with ParseError.
KnowledgePath parse(std::string_view text);

/// Stable 16-hex-digit id for a serialized path.
std::string path_id_for(std::string_view serialized);

/// All root-to-leaf paths of one tree, in depth-first pre-order of leaves.
class PathCorpus {
 public:
  PathCorpus() = default;
  /// Throws ValidationError if two paths collide on id or repeat.
  PathCorpus(std::string conference_id, std::vector<KnowledgePath> paths);

  const std::string& conference_id() const noexcept { return conference_id_; }
  const std::vector<KnowledgePath>& paths() const noexcept { return paths_; }
  std::size_t size() const noexcept { return paths_.size(); }
  bool empty() const noexcept { return paths_.empty(); }

  /// nullptr when the id is unknown.
  const KnowledgePath* find(std::string_view path_id) const;

  /// sha256 over the serialized paths, one per line. Artifacts derived from
  /// the corpus record it so stale inputs are detected.
  const std::string& content_hash() const noexcept { return content_hash_; }

 private:
  std::string conference_id_;
  std::vector<KnowledgePath> paths_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::string content_hash_;
};

PathCorpus flatten_paths(const KnowledgeTree& tree);

/// Paths file: one serialized path per line, UTF-8, '\n' terminated.
std::string to_paths_file(const PathCorpus& corpus);
PathCorpus parse_paths_file(std::string_view content, std::string conference_id);
void save_paths_file(const PathCorpus& corpus, const std::filesystem::path& file);
PathCorpus load_paths_file(const std::filesystem::path& file, std::string conference_id);

/// Sibling lists in a NodeContext keep at most this many entries.
inline constexpr std::size_t kMaxContextSiblings = 30;

/// Structural neighbourhood of one node, as consumed by description prompts.
struct NodeContext {
  std::vector<std::string> target;         // root .. node
  std::vector<std::string> parent_prefix;  // target minus its last label
  std::vector<std::string> siblings;       // rendered, capped, in tree order
  std::size_t omitted_siblings = 0;        // siblings dropped by the cap
  bool is_leaf = false;
};

/// Rendering of a leaf sibling together with its parent's text.
std::string render_leaf_sibling(std::string_view parent_label, std::string_view sibling_label);

/// Context of the node addressed by `prefix` (which starts at the root
/// label). Leaf siblings are rendered with render_leaf_sibling(); internal
/// siblings keep their bare label. Throws NotFoundError for unknown prefixes.
NodeContext node_context(const KnowledgeTree& tree, std::span<const std::string> prefix);

/// Same as above for a node already located; `parent` is null for the root.
NodeContext node_context(const TreeNode& node, const TreeNode* parent, std::vector<std::string> target);

}  // namespace starqa
