#include "starqa/path.hpp"

#include "starqa/errors.hpp"
#include "starqa/hash.hpp"
#include "starqa/io.hpp"

namespace starqa {

std::string serialize(std::span<const std::string> labels) {
  std::string out;
  std::size_t total = 0;
  for (const auto& label : labels) total += label.size() + kPathSeparator.size();
  out.reserve(total);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += kPathSeparator;
    out += labels[i];
  }
  return out;
}

std::string path_id_for(std::string_view serialized) { return sha256_hex(serialized).substr(0, 16); }

KnowledgePath::KnowledgePath(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw ValidationError("path must have at least one label");
  for (const auto& label : labels_) {
    if (label.empty()) throw ValidationError("path contains an empty label");
    if (label.find(kPathSeparator) != std::string::npos || label.front() == '>' || label.back() == '>') {
      throw ValidationError("path label contains '>>' or starts/ends with '>': " + label);
    }
  }
  serialized_ = serialize(labels_);
  id_ = path_id_for(serialized_);
}

KnowledgePath parse(std::string_view text) {
  if (text.empty()) throw ParseError("empty path");
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(kPathSeparator, start);
    const auto segment = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (segment.empty()) throw ParseError("empty segment in path: " + std::string(text));
    labels.emplace_back(segment);
    if (pos == std::string_view::npos) break;
    start = pos + kPathSeparator.size();
  }
  // "a>>>b" splits as "a" and ">b"; a label may not start with '>' either,
  // otherwise serialize() would not be injective.
  for (const auto& label : labels) {
    if (label.front() == '>' || label.back() == '>') {
      throw ParseError("ambiguous separator run in path: " + std::string(text));
    }
  }
  return KnowledgePath(std::move(labels));
}

PathCorpus::PathCorpus(std::string conference_id, std::vector<KnowledgePath> paths)
    : conference_id_(std::move(conference_id)), paths_(std::move(paths)) {
  by_id_.reserve(paths_.size());
  std::string joined;
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    const auto [it, inserted] = by_id_.emplace(paths_[i].id(), i);
    if (!inserted) {
      const auto& other = paths_[it->second];
      if (other.serialized() == paths_[i].serialized()) {
        throw ValidationError("duplicate path in corpus: " + paths_[i].serialized());
      }
      throw ValidationError("path id collision between '" + other.serialized() + "' and '" +
                            paths_[i].serialized() + "'");
    }
    joined += paths_[i].serialized();
    joined.push_back('\n');
  }
  content_hash_ = sha256_hex(joined);
}

const KnowledgePath* PathCorpus::find(std::string_view path_id) const {
  const auto it = by_id_.find(std::string(path_id));
  return it == by_id_.end() ? nullptr : &paths_[it->second];
}

namespace {

void collect_paths(const TreeNode& node, std::vector<std::string>& chain, std::vector<KnowledgePath>& out) {
  chain.push_back(node.label);
  if (node.is_leaf()) {
    out.emplace_back(chain);
  } else {
    for (const auto& child : node.children) collect_paths(child, chain, out);
  }
  chain.pop_back();
}

}  // namespace

PathCorpus flatten_paths(const KnowledgeTree& tree) {
  std::vector<KnowledgePath> paths;
  paths.reserve(count_leaves(tree.root));
  std::vector<std::string> chain;
  collect_paths(tree.root, chain, paths);
  return PathCorpus(tree.conference_id, std::move(paths));
}

std::string to_paths_file(const PathCorpus& corpus) {
  std::string out;
  for (const auto& path : corpus.paths()) {
    out += path.serialized();
    out.push_back('\n');
  }
  return out;
}

PathCorpus parse_paths_file(std::string_view content, std::string conference_id) {
  std::vector<KnowledgePath> paths;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    auto line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    try {
      paths.push_back(parse(line));
    } catch (const Error& e) {
      throw ParseError("paths file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return PathCorpus(std::move(conference_id), std::move(paths));
}

void save_paths_file(const PathCorpus& corpus, const std::filesystem::path& file) {
  io::write_file_atomic(file, to_paths_file(corpus));
}

PathCorpus load_paths_file(const std::filesystem::path& file, std::string conference_id) {
  return parse_paths_file(io::read_file(file), std::move(conference_id));
}

std::string render_leaf_sibling(std::string_view parent_label, std::string_view sibling_label) {
  std::string out(parent_label);
  out += ": ";
  out += sibling_label;
  return out;
}

NodeContext node_context(const TreeNode& node, const TreeNode* parent, std::vector<std::string> target) {
  NodeContext context;
  context.is_leaf = node.is_leaf();
  context.parent_prefix.assign(target.begin(), target.end() - (target.empty() ? 0 : 1));
  context.target = std::move(target);
  if (parent == nullptr) return context;

  const std::size_t total = parent->children.size() - 1;
  for (const auto& sibling : parent->children) {
    if (&sibling == &node) continue;
    if (context.siblings.size() == kMaxContextSiblings) break;
    context.siblings.push_back(sibling.is_leaf() ? render_leaf_sibling(parent->label, sibling.label)
                                                 : sibling.label);
  }
  context.omitted_siblings = total - context.siblings.size();
  return context;
}

NodeContext node_context(const KnowledgeTree& tree, std::span<const std::string> prefix) {
  auto not_found = [&] { return NotFoundError("no node at path: " + serialize(prefix)); };
  if (prefix.empty() || prefix.front() != tree.root.label) throw not_found();
  const TreeNode* parent = nullptr;
  const TreeNode* node = &tree.root;
  for (std::size_t depth = 1; depth < prefix.size(); ++depth) {
    const TreeNode* next = nullptr;
    for (const auto& child : node->children) {
      if (child.label == prefix[depth]) {
        next = &child;
        break;
      }
    }
    if (next == nullptr) throw not_found();
    parent = node;
    node = next;
  }
  return node_context(*node, parent, std::vector<std::string>(prefix.begin(), prefix.end()));
}

}  // namespace starqa
