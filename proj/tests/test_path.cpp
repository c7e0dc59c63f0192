#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "starqa/errors.hpp"
#include "starqa/hash.hpp"
#include "starqa/path.hpp"

namespace {

using Labels = std::vector<std::string>;

starqa::KnowledgeTree registration_tree() {
  // Three branches under Virtual Conference, each ending in a fee leaf.
  using starqa::TreeNode;
  TreeNode virt{"Virtual Conference",
                {{"ACM Members", {{"$300", {}}}}, {"Non Members", {{"$350", {}}}}, {"Students", {{"$150", {}}}}}};
  TreeNode fee{"Register Fee", {virt}};
  TreeNode reg{"Registration", {fee, {"Registration Deadline", {}}}};
  return {"WWW2023", {"WWW2023", {{"Attendees", {reg}}}}};
}

}  // namespace

TEST(PathFormat, FixtureSerialization) {
  const auto corpus = starqa::flatten_paths(registration_tree());
  ASSERT_EQ(corpus.size(), 4u);
  EXPECT_EQ(corpus.paths()[0].serialized(),
            "WWW2023>>Attendees>>Registration>>Register Fee>>Virtual Conference>>ACM Members>>$300");
  EXPECT_EQ(corpus.paths()[3].serialized(), "WWW2023>>Attendees>>Registration>>Registration Deadline");
}

TEST(PathFormat, ParseRejectsMalformed) {
  for (const char* bad : {"", ">>", "a>>", ">>a", "a>>>>b", "a>>>b", "a>>b>"}) {
    EXPECT_THROW(starqa::parse(bad), starqa::ParseError) << bad;
  }
  EXPECT_EQ(starqa::parse("a > b>>c").labels(), (Labels{"a > b", "c"}));
}

TEST(PathFormat, IdIsHashPrefixOfSerializedForm) {
  const auto p = starqa::parse("WWW2023>>Program>>Venue>>Austin, Texas, USA");
  EXPECT_EQ(p.id(), starqa::sha256_hex("WWW2023>>Program>>Venue>>Austin, Texas, USA").substr(0, 16));
  EXPECT_EQ(p.id().size(), 16u);
  EXPECT_EQ(p.id(), starqa::path_id_for(p.serialized()));
}

TEST(PathFormat, RoundTripProperty) {
  std::mt19937 rng(3);
  const std::string alphabet = "ab >$:,.-\xC3\xBC" "1";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(1, 12), count(1, 9);
  for (int i = 0; i < 2000; ++i) {
    Labels labels;
    for (std::size_t n = count(rng); labels.size() < n;) {
      std::string label;
      for (std::size_t l = len(rng); label.size() < l;) label += alphabet[pick(rng)];
      // Valid labels: no separator, no edge '>' and not blank after trimming.
      while (label.find(">>") != std::string::npos) label.replace(label.find(">>"), 2, "x");
      if (label.front() == '>' || label.back() == '>' || label.front() == ' ' || label.back() == ' ') continue;
      if ((static_cast<unsigned char>(label.back()) & 0xC0) == 0xC0) continue;  // cut code point
      labels.push_back(label);
    }
    const starqa::KnowledgePath path(labels);
    const auto back = starqa::parse(path.serialized());
    ASSERT_EQ(back.labels(), labels) << path.serialized();
    ASSERT_EQ(back.id(), path.id());
  }
}

TEST(PathCorpus, FlattenMatchesLeafCountAndOrder) {
  std::mt19937 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto tree = starqa::testing::random_tree(rng);
    const auto corpus = starqa::flatten_paths(tree);
    ASSERT_EQ(corpus.size(), starqa::count_leaves(tree.root));
    std::set<std::string> seen;
    for (const auto& p : corpus.paths()) {
      ASSERT_EQ(p.labels().front(), tree.root.label);
      ASSERT_TRUE(seen.insert(p.serialized()).second);
      ASSERT_EQ(corpus.find(p.id()), &p);
    }
  }
}

TEST(PathCorpus, FileRoundTripAndHash) {
  const auto corpus = starqa::flatten_paths(registration_tree());
  const auto text = starqa::to_paths_file(corpus);
  EXPECT_EQ(text.back(), '\n');
  const auto back = starqa::parse_paths_file(text, "WWW2023");
  EXPECT_EQ(back.paths(), corpus.paths());
  EXPECT_EQ(back.content_hash(), corpus.content_hash());
  EXPECT_EQ(corpus.content_hash(), starqa::sha256_hex(text));
  EXPECT_EQ(corpus.find("0000000000000000"), nullptr);
}

TEST(PathCorpus, DuplicatePathsRejected) {
  EXPECT_THROW(starqa::parse_paths_file("a>>b\na>>b\n", "a"), starqa::ValidationError);
  EXPECT_THROW(starqa::parse_paths_file("a>>b\na>>>b\n", "a"), starqa::ParseError);
}

TEST(NodeContextTest, Root) {
  const auto tree = registration_tree();
  const auto ctx = starqa::node_context(tree, Labels{"WWW2023"});
  EXPECT_TRUE(ctx.parent_prefix.empty());
  EXPECT_TRUE(ctx.siblings.empty());
  EXPECT_EQ(ctx.omitted_siblings, 0u);
  EXPECT_FALSE(ctx.is_leaf);
}

TEST(NodeContextTest, RegistrationBranches) {
  const auto tree = registration_tree();
  const Labels acm{"WWW2023", "Attendees", "Registration", "Register Fee", "Virtual Conference", "ACM Members"};
  const auto ctx = starqa::node_context(tree, acm);
  EXPECT_EQ(ctx.target, acm);
  EXPECT_EQ(ctx.parent_prefix, Labels(acm.begin(), acm.end() - 1));
  // Non Members and Students hold the fee leaves; they are internal nodes, so bare.
  EXPECT_EQ(ctx.siblings, (Labels{"Non Members", "Students"}));

  // A leaf whose siblings are leaves gets them with the parent's text.
  const auto deadline = starqa::node_context(tree, Labels{"WWW2023", "Attendees", "Registration",
                                                          "Registration Deadline"});
  EXPECT_TRUE(deadline.is_leaf);
  EXPECT_EQ(deadline.siblings, Labels{"Register Fee"});

  starqa::KnowledgeTree leaves{"C", {"C", {{"Non Members", {{"$350", {}}, {"$400 onsite", {}}}}}}};
  const auto leaf_ctx = starqa::node_context(leaves, Labels{"C", "Non Members", "$350"});
  EXPECT_EQ(leaf_ctx.siblings, Labels{"Non Members: $400 onsite"});
  EXPECT_EQ(starqa::render_leaf_sibling("Non Members", "$350"), "Non Members: $350");
}

TEST(NodeContextTest, SiblingCap) {
  starqa::KnowledgeTree tree{"C", {"C", {}}};
  for (int i = 0; i < 100; ++i) tree.root.children.push_back({"s" + std::to_string(i), {}});
  const auto ctx = starqa::node_context(tree, Labels{"C", "s0"});
  ASSERT_EQ(ctx.siblings.size(), starqa::kMaxContextSiblings);
  EXPECT_EQ(ctx.siblings.front(), "C: s1");
  EXPECT_EQ(ctx.siblings.back(), "C: s30");
  EXPECT_EQ(ctx.omitted_siblings, 69u);
}

TEST(NodeContextTest, UnknownPrefix) {
  EXPECT_THROW(starqa::node_context(registration_tree(), Labels{"WWW2023", "Nope"}), starqa::NotFoundError);
  EXPECT_THROW(starqa::node_context(registration_tree(), Labels{"Other"}), starqa::NotFoundError);
}

TEST(NodeContextTest, SiblingsNeverContainTarget) {
  std::mt19937 rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto tree = starqa::testing::random_tree(rng);
    const auto corpus = starqa::flatten_paths(tree);
    for (const auto& p : corpus.paths()) {
      const auto ctx = starqa::node_context(tree, p.labels());
      if (ctx.parent_prefix.empty()) continue;
      const auto& self = p.leaf();
      const auto rendered = starqa::render_leaf_sibling(ctx.parent_prefix.back(), self);
      for (const auto& s : ctx.siblings) ASSERT_TRUE(s != self && s != rendered);
    }
  }
}
