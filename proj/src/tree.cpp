#include "starqa/tree.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <unordered_set>

#include "starqa/errors.hpp"
#include "starqa/io.hpp"
#include "starqa/text.hpp"

namespace starqa {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string join_prefix(const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& label : labels) {
    if (!out.empty()) out += kPathSeparator;
    out += label;
  }
  return out;
}

void check_label(const std::string& label, const std::vector<std::string>& parent_chain) {
  if (text::trim(label).empty()) {
    throw ValidationError("empty label under " +
                          (parent_chain.empty() ? std::string("<document>") : join_prefix(parent_chain)));
  }
  // A label ending or starting with '>' would make "a>>>b" ambiguous.
  if (label.find(kPathSeparator) != std::string::npos || label.front() == '>' || label.back() == '>') {
    auto chain = parent_chain;
    chain.push_back(label);
    throw ValidationError("label contains '>>' or starts/ends with '>': " + join_prefix(chain));
  }
}

void validate_node(const TreeNode& node, std::vector<std::string>& chain) {
  check_label(node.label, chain);
  chain.push_back(node.label);
  std::unordered_set<std::string_view> seen;
  seen.reserve(node.children.size());
  for (const auto& child : node.children) {
    if (!seen.insert(child.label).second) {
      throw ValidationError("duplicate sibling label: " + join_prefix(chain) + std::string(kPathSeparator) +
                            child.label);
    }
  }
  for (const auto& child : node.children) validate_node(child, chain);
  chain.pop_back();
}

TreeNode node_from_json(const json& value, std::vector<std::string>& chain) {
  if (!value.is_object()) throw ParseError("tree node must be an object under " + join_prefix(chain));
  const auto label_it = value.find("label");
  if (label_it == value.end() || !label_it->is_string()) {
    throw ParseError("tree node without string 'label' under " + join_prefix(chain));
  }
  TreeNode node;
  node.label = text::trim(label_it->get_ref<const std::string&>());
  check_label(node.label, chain);

  const auto children_it = value.find("children");
  if (children_it == value.end()) return node;
  if (!children_it->is_array()) throw ParseError("'children' must be an array at " + node.label);

  chain.push_back(node.label);
  node.children.reserve(children_it->size());
  std::unordered_set<std::string> seen;
  for (const auto& child_value : *children_it) {
    auto child = node_from_json(child_value, chain);
    if (!seen.insert(child.label).second) {
      throw ValidationError("duplicate sibling label: " + join_prefix(chain) + std::string(kPathSeparator) +
                            child.label);
    }
    node.children.push_back(std::move(child));
  }
  chain.pop_back();
  return node;
}

json node_to_json(const TreeNode& node) {
  json children = json::array();
  for (const auto& child : node.children) children.push_back(node_to_json(child));
  json out = json::object();
  out["label"] = node.label;
  out["children"] = std::move(children);
  return out;
}

std::string scalar_label(const ordered_json& value) {
  if (value.is_string()) return text::trim(value.get_ref<const std::string&>());
  if (value.is_null()) return {};
  return value.dump();
}

void add_nested_children(TreeNode& parent, const ordered_json& value, std::vector<std::string>& chain);

void add_nested_child(TreeNode& parent, std::string label, const ordered_json& value,
                      std::vector<std::string>& chain) {
  label = text::trim(label);
  check_label(label, chain);
  TreeNode child{label, {}};
  chain.push_back(label);
  add_nested_children(child, value, chain);
  chain.pop_back();
  // A key with nothing under it is itself the content.
  parent.children.push_back(std::move(child));
}

void add_nested_children(TreeNode& parent, const ordered_json& value, std::vector<std::string>& chain) {
  if (value.is_object()) {
    for (const auto& [key, item] : value.items()) add_nested_child(parent, key, item, chain);
  } else if (value.is_array()) {
    std::size_t position = 0;
    for (const auto& item : value) {
      ++position;
      if (item.is_object() || item.is_array()) {
        add_nested_child(parent, std::to_string(position), item, chain);
      } else {
        auto label = scalar_label(item);
        if (label.empty()) continue;
        check_label(label, chain);
        parent.children.push_back(TreeNode{std::move(label), {}});
      }
    }
  } else {
    auto label = scalar_label(value);
    if (label.empty()) return;
    check_label(label, chain);
    parent.children.push_back(TreeNode{std::move(label), {}});
  }
}

void depth_walk(const TreeNode& node, std::size_t depth, TreeStats& out, double& depth_sum) {
  if (node.is_leaf()) {
    ++out.path_count;
    depth_sum += static_cast<double>(depth);
    out.max_depth = std::max(out.max_depth, depth);
    return;
  }
  for (const auto& child : node.children) depth_walk(child, depth + 1, out, depth_sum);
}

}  // namespace

void validate(const KnowledgeTree& tree) {
  if (tree.root.label != tree.conference_id) {
    throw ValidationError("root label '" + tree.root.label + "' differs from conference id '" +
                          tree.conference_id + "'");
  }
  std::vector<std::string> chain;
  validate_node(tree.root, chain);
}

KnowledgeTree ingest_json(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed tree document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("tree document must be an object");
  const auto conf = doc.find("conference");
  const auto root = doc.find("root");
  if (conf == doc.end() || !conf->is_string()) throw ParseError("tree document lacks string 'conference'");
  if (root == doc.end()) throw ParseError("tree document lacks 'root'");

  KnowledgeTree tree;
  tree.conference_id = text::trim(conf->get_ref<const std::string&>());
  std::vector<std::string> chain;
  tree.root = node_from_json(*root, chain);
  if (tree.root.label != tree.conference_id) {
    throw ValidationError("root label '" + tree.root.label + "' differs from conference id '" +
                          tree.conference_id + "'");
  }
  return tree;
}

std::string to_json(const KnowledgeTree& tree) {
  json doc = json::object();
  doc["conference"] = tree.conference_id;
  doc["root"] = node_to_json(tree.root);
  return doc.dump() + "\n";
}

KnowledgeTree ingest_nested_json(std::string_view document, const std::string& conference_id) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("malformed nested tree document: ") + e.what());
  }
  KnowledgeTree tree;
  tree.conference_id = text::trim(conference_id);
  tree.root.label = tree.conference_id;
  std::vector<std::string> chain{tree.conference_id};
  check_label(tree.conference_id, {});
  const ordered_json* body = &doc;
  if (doc.is_object() && doc.size() == 1 && text::trim(doc.begin().key()) == tree.conference_id) {
    body = &doc.begin().value();
  }
  add_nested_children(tree.root, *body, chain);
  validate(tree);
  return tree;
}

TreeStats stats(const KnowledgeTree& tree) {
  TreeStats out;
  double depth_sum = 0.0;
  depth_walk(tree.root, 1, out, depth_sum);
  out.avg_depth = out.path_count == 0 ? 0.0 : depth_sum / static_cast<double>(out.path_count);
  return out;
}

std::size_t count_leaves(const TreeNode& node) {
  if (node.is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& child : node.children) n += count_leaves(child);
  return n;
}

KnowledgeTree load_tree_file(const std::filesystem::path& file) { return ingest_json(io::read_file(file)); }

void save_tree_file(const KnowledgeTree& tree, const std::filesystem::path& file) {
  io::write_file_atomic(file, to_json(tree));
}

}  // namespace starqa
