#pragma once

// Test-only reference implementations. Kept deliberately naive and separate
// from the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "starqa/gateway.hpp"
#include "starqa/text.hpp"
#include "starqa/tree.hpp"

namespace starqa::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(STARQA_FIXTURE_DIR) / name;
}

/// Cosine straight from the definition, zero vectors scoring 0.
inline double oracle_cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    aa += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    bb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

/// BM25 recomputed from scratch per call: document frequencies recounted,
/// token lists scanned linearly.
inline std::vector<double> oracle_bm25(const std::vector<std::string>& docs, const std::string& query, double k1,
                                       double b) {
  std::vector<std::vector<std::string>> tokens;
  double total = 0.0;
  for (const auto& d : docs) {
    tokens.push_back(text::tokenize_path_text(d));
    total += static_cast<double>(tokens.back().size());
  }
  const double n = static_cast<double>(docs.size());
  const double avgdl = total / n;
  std::vector<double> out(docs.size(), 0.0);
  for (const auto& term : text::tokenize_path_text(query)) {
    double df = 0.0;
    for (const auto& t : tokens) df += std::count(t.begin(), t.end(), term) > 0 ? 1.0 : 0.0;
    if (df == 0.0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const double tf = static_cast<double>(std::count(tokens[i].begin(), tokens[i].end(), term));
      if (tf == 0.0) continue;
      const double dl = static_cast<double>(tokens[i].size());
      out[i] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
  }
  return out;
}

/// Full sort by (score desc, serialized path asc), then the first k.
inline std::vector<std::pair<std::string, double>> oracle_rank(std::vector<std::pair<std::string, double>> scored,
                                                               std::size_t k) {
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  scored.resize(std::min(k, scored.size()));
  return scored;
}

/// Random valid tree. Labels come from a small vocabulary so lexical and
/// dense scores tie often, which exercises tie-breaking.
inline KnowledgeTree random_tree(std::mt19937& rng, std::size_t max_depth = 5, std::size_t max_children = 5) {
  static const std::vector<std::string> kWords = {
      "Registration", "Fee",      "Deadline", "Paper",  "Track",    "Workshop", "Keynote", "Venue",
      "Visa",         "Students", "Members",  "$300",   "$350",     "June",     "Austin",  "Chair",
      "Program",      "Award",    "Poster",   "Demo",   "Tutorial", "2023",     "Virtual", "Hotel"};
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  std::uniform_int_distribution<std::size_t> width(1, max_children);
  std::uniform_int_distribution<int> coin(0, 2);

  std::function<TreeNode(std::string, std::size_t)> grow = [&](std::string label, std::size_t depth) {
    TreeNode node{std::move(label), {}};
    if (depth >= max_depth || (depth > 1 && coin(rng) == 0)) return node;
    const auto n = width(rng);
    std::set<std::string> used;
    for (std::size_t i = 0; i < n; ++i) {
      std::string child = kWords[word(rng)];
      if (coin(rng) == 0) child += " " + kWords[word(rng)];
      if (!used.insert(child).second) continue;
      node.children.push_back(grow(child, depth + 1));
    }
    return node;
  };
  KnowledgeTree tree;
  tree.conference_id = "CONF" + std::to_string(rng() % 1000);
  tree.root = grow(tree.conference_id, 1);
  return tree;
}

/// Node count from root to each leaf, computed by explicit stack walk.
inline std::vector<std::size_t> oracle_leaf_depths(const TreeNode& root) {
  std::vector<std::size_t> depths;
  std::vector<std::pair<const TreeNode*, std::size_t>> stack{{&root, 1}};
  while (!stack.empty()) {
    auto [node, depth] = stack.back();
    stack.pop_back();
    if (node->children.empty()) depths.push_back(depth);
    for (const auto& c : node->children) stack.push_back({&c, depth + 1});
  }
  return depths;
}

}  // namespace starqa::testing
