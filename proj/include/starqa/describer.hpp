#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "starqa/gateway.hpp"
#include "starqa/path.hpp"
#include "starqa/tree.hpp"

namespace starqa {

/// Version tag of the description prompt template below. Bump it whenever
/// build_description_prompt() output changes.
inline constexpr std::string_view kDescriptionPromptVersion = "star-desc-v1";

/// Leaf values longer than this are cut (prompt only, never in the tree).
inline constexpr std::size_t kPromptValueLimit = 500;

enum class DescriptionSource { generated, cached };

struct PathDescription {
  std::string path_id;
  std::vector<std::string> prefix;  // root .. described node
  std::string text;
  std::string prompt_version;
  DescriptionSource source = DescriptionSource::generated;
  bool fallback = false;   // generation came back empty; text is the serialized prefix
  std::string cache_key;   // see description_cache_key()
};

/// Descriptions of one conference. `entries` holds leaf paths (the retrieval
/// knowledge source); `internal` keeps the descriptions of internal nodes,
/// which only serve as parent context for their children.
struct DescriptionStore {
  std::string conference_id;
  std::string prompt_version{kDescriptionPromptVersion};
  std::string corpus_hash;
  std::map<std::string, PathDescription> entries;
  std::map<std::string, PathDescription> internal;

  const PathDescription* find(std::string_view path_id) const;
};

bool operator==(const PathDescription& a, const PathDescription& b);
bool operator==(const DescriptionStore& a, const DescriptionStore& b);

/// System instruction sent alongside every description prompt.
std::string_view description_system_prompt();

/// The user prompt for one node: target path, parent description (or the
/// root preamble), sibling list, instruction. Deterministic.
std::string build_description_prompt(const NodeContext& context, const std::optional<std::string>& parent_description);

/// sha256 over (path id, parent description hash, sibling-set hash, prompt
/// version). Any structural change upstream changes the key.
std::string description_cache_key(const NodeContext& context, const std::optional<std::string>& parent_description,
                                   std::string_view prompt_version);

struct DescribeOptions {
  std::size_t max_in_flight = 8;
  /// Final store file. Completed entries are journaled to "<store>.journal"
  /// while the run is in progress. Empty = in-memory only.
  std::filesystem::path store_file;
  std::string prompt_version{kDescriptionPromptVersion};
  /// Called after each node completes, from worker threads.
  std::function<void(const PathDescription&)> on_progress;
};

/// Generates descriptions top-down, one tree level at a time; within a level
/// up to `max_in_flight` requests run concurrently. Entries found in an
/// existing store or journal with a matching cache key are reused without a
/// gateway call. On gateway failure the journal keeps every completed entry
/// and the error is rethrown.
DescriptionStore describe_tree(const KnowledgeTree& tree, const PathCorpus& corpus, ChatBackend& llm,
                               const DescribeOptions& options = {});

/// Store file: a header line then one JSON record per line
/// ({path_id, prefix, text, prompt_version, kind, fallback, cache_key}),
/// sorted by prefix. Written atomically.
std::string to_store_file(const DescriptionStore& store);
void save_store(const DescriptionStore& store, const std::filesystem::path& file);

enum class VersionPolicy { warn, strict };

/// Throws CorruptFileError for truncated/malformed files. A prompt_version
/// different from `expected_version` is an error under VersionPolicy::strict
/// and a warning on stderr otherwise.
DescriptionStore parse_store(std::string_view content, std::string_view expected_version = kDescriptionPromptVersion,
                             VersionPolicy policy = VersionPolicy::warn);
DescriptionStore load_store(const std::filesystem::path& file,
                            std::string_view expected_version = kDescriptionPromptVersion,
                            VersionPolicy policy = VersionPolicy::warn);

}  // namespace starqa
