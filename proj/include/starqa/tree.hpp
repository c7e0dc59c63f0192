#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace starqa {

/// Separator between labels in a serialized path. Labels never contain it.
inline constexpr std::string_view kPathSeparator = ">>";

/// A page, section heading, key, or (at the leaves) content value.
/// Children are kept in ingestion order; sibling order feeds description
/// prompts, so it is never re-sorted.
struct TreeNode {
  std::string label;
  std::vector<TreeNode> children;

  bool is_leaf() const noexcept { return children.empty(); }
  bool operator==(const TreeNode&) const = default;
};

/// One conference's knowledge. `root.label == conference_id` always.
/// Immutable after ingestion.
struct KnowledgeTree {
  std::string conference_id;
  TreeNode root;

  bool operator==(const KnowledgeTree&) const = default;
};

/// Depth is counted in nodes, root and leaf inclusive: a root with only leaf
/// children has depth 2.
struct TreeStats {
  std::size_t path_count = 0;
  double avg_depth = 0.0;
  std::size_t max_depth = 0;

  /// The same average counted in edges (avg_depth - 1).
  double avg_edge_depth() const noexcept { return avg_depth - 1.0; }
};

/// Throws ValidationError on the first invariant violation found.
void validate(const KnowledgeTree& tree);

/// Parses the canonical tree document:
///   {"conference": "...", "root": {"label": "...", "children": [...]}}
/// Labels are whitespace-trimmed. Duplicate sibling errors carry the full
/// path of the offending node.
KnowledgeTree ingest_json(std::string_view document);

/// Canonical tree document for `tree` (compact, key order fixed, trailing
/// newline). ingest_json(to_json(t)) == t.
std::string to_json(const KnowledgeTree& tree);

/// Imports a tree stored as nested JSON objects, i.e. the shape
///   {"Attendees": {"Registration": {"Fee": "$300"}}}
/// Object keys become internal nodes in document order, scalar values become
/// leaves, array items become children (objects inside arrays are labelled by
/// their 1-based position). Empty values add no leaf; a key left without
/// children is kept as a leaf itself. A document holding a
/// single top-level key equal to `conference_id` is unwrapped.
KnowledgeTree ingest_nested_json(std::string_view document, const std::string& conference_id);

/// Builds a tree from the h1-h6 heading outline of an HTML page. The page
/// <title> (or else the first h1, or else the first heading) is the root.
/// Text between a heading and the next one becomes a single leaf under that
/// heading. Repeated sibling labels get a " (2)", " (3)" ... suffix and any
/// ">>" inside text is rewritten to "»", so the result always validates.
/// Throws ParseError on unterminated tags/comments and ValidationError when
/// the page has no headings.
KnowledgeTree ingest_html_headings(std::string_view html);

TreeStats stats(const KnowledgeTree& tree);

/// Number of leaves under (and including) `node`.
std::size_t count_leaves(const TreeNode& node);

KnowledgeTree load_tree_file(const std::filesystem::path& file);
void save_tree_file(const KnowledgeTree& tree, const std::filesystem::path& file);

}  // namespace starqa
