#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "oracles.hpp"
#include "recording_chat.hpp"
#include "starqa/describer.hpp"
#include "starqa/errors.hpp"
#include "starqa/io.hpp"
#include "starqa/mock_backends.hpp"

namespace {

using Labels = std::vector<std::string>;
namespace fs = std::filesystem;

std::string golden(const std::string& name, const std::string& actual) {
  const auto file = fs::path(STARQA_GOLDEN_DIR) / name;
  if (std::getenv("STARQA_UPDATE_GOLDEN") != nullptr) starqa::io::write_file_atomic(file, actual);
  return starqa::io::read_file(file);
}

// Three levels below the root, four leaves.
starqa::KnowledgeTree three_level_tree() {
  return starqa::ingest_json(R"({"conference":"T","root":{"label":"T","children":[
    {"label":"Dates","children":[{"label":"Paper","children":[{"label":"May 1"}]},
                                 {"label":"Camera","children":[{"label":"June 2"}]}]},
    {"label":"Venue","children":[{"label":"City","children":[{"label":"Austin"},{"label":"Texas"}]}]}]}})");
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "starqa_describer_tests";
  fs::create_directories(dir);
  const auto file = dir / name;
  fs::remove(file);
  fs::remove(fs::path(file.string() + ".journal"));
  return file;
}

class ScriptedChat final : public starqa::ChatBackend {
 public:
  explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string model_id() const override { return "scripted"; }
  std::string chat(const std::vector<starqa::ChatMessage>&, const starqa::ChatParams&) override {
    return replies_.at(std::min(calls++, replies_.size() - 1));
  }
  std::size_t calls = 0;

 private:
  std::vector<std::string> replies_;
};

}  // namespace

TEST(DescriptionPrompt, GoldenSampleContext) {
  starqa::NodeContext ctx;
  ctx.target = {"WWW2023", "Attendees", "Registration", "Register Fee", "Virtual Conference", "ACM Members"};
  ctx.parent_prefix = {ctx.target.begin(), ctx.target.end() - 1};
  ctx.siblings = {"Non Members", "Students"};
  const auto prompt = starqa::build_description_prompt(
      ctx, std::string("Registration fees that apply to attendees joining the WWW2023 conference virtually."));
  EXPECT_EQ(prompt, golden("description_prompt.txt", prompt));
}

TEST(DescriptionPrompt, RootHasPreambleAndNoParent) {
  const auto tree = three_level_tree();
  const auto prompt = starqa::build_description_prompt(starqa::node_context(tree, Labels{"T"}), std::nullopt);
  EXPECT_NE(prompt.find("root of the knowledge tree"), std::string::npos);
  EXPECT_EQ(prompt.find("Parent description"), std::string::npos);
  EXPECT_EQ(prompt.rfind("Path: T\n", 0), 0u);
}

TEST(DescriptionPrompt, SectionOrderIsFixed) {
  const auto tree = three_level_tree();
  const auto prompt = starqa::build_description_prompt(
      starqa::node_context(tree, Labels{"T", "Venue", "City", "Austin"}), std::string("PARENT"));
  const auto path = prompt.find("Path: T>>Venue>>City>>Austin");
  const auto parent = prompt.find("Parent description: PARENT");
  const auto siblings = prompt.find("- City: Texas");
  const auto instruction = prompt.find("Write one standalone paragraph");
  EXPECT_LT(path, parent);
  EXPECT_LT(parent, siblings);
  EXPECT_LT(siblings, instruction);
  EXPECT_NE(instruction, std::string::npos);
}

TEST(DescriptionPrompt, HundredSiblingsShowThirtyAndElision) {
  starqa::KnowledgeTree tree{"C", {"C", {}}};
  for (int i = 0; i < 101; ++i) tree.root.children.push_back({"s" + std::to_string(i), {}});
  const auto prompt =
      starqa::build_description_prompt(starqa::node_context(tree, Labels{"C", "s0"}), std::string("d"));
  std::size_t bullets = 0;
  for (std::size_t at = prompt.find("\n- "); at != std::string::npos; at = prompt.find("\n- ", at + 1)) ++bullets;
  EXPECT_EQ(bullets, 31u);  // 30 siblings + elision marker
  EXPECT_NE(prompt.find("Siblings (100):"), std::string::npos);
  EXPECT_NE(prompt.find("- ... (70 more)\n"), std::string::npos);
  EXPECT_NE(prompt.find("- C: s30\n"), std::string::npos);
  EXPECT_EQ(prompt.find("- C: s31\n"), std::string::npos);
}

TEST(DescriptionPrompt, LongLeafValuesTruncatedInPromptOnly) {
  const std::string abstract(800, 'x');
  starqa::KnowledgeTree tree{"C", {"C", {{"Abstract", {{abstract, {}}}}}}};
  const auto prompt = starqa::build_description_prompt(
      starqa::node_context(tree, Labels{"C", "Abstract", abstract}), std::string("d"));
  EXPECT_NE(prompt.find(std::string(500, 'x') + "...\n"), std::string::npos);
  EXPECT_EQ(prompt.find(std::string(501, 'x')), std::string::npos);
  EXPECT_EQ(tree.root.children[0].children[0].label.size(), 800u);
}

TEST(DescriptionCacheKey, SensitiveToEveryComponent) {
  const auto tree = three_level_tree();
  const auto ctx = starqa::node_context(tree, Labels{"T", "Venue", "City", "Austin"});
  const auto base = starqa::description_cache_key(ctx, std::string("p"), "v1");
  EXPECT_EQ(base, starqa::description_cache_key(ctx, std::string("p"), "v1"));
  EXPECT_NE(base, starqa::description_cache_key(ctx, std::string("q"), "v1"));
  EXPECT_NE(base, starqa::description_cache_key(ctx, std::nullopt, "v1"));
  EXPECT_NE(base, starqa::description_cache_key(ctx, std::string("p"), "v2"));
  auto other = ctx;
  other.siblings.push_back("City: Dallas");
  EXPECT_NE(base, starqa::description_cache_key(other, std::string("p"), "v1"));
}

TEST(DescribeTree, SingleLeafWithEcho) {
  const auto tree = starqa::ingest_json(R"({"conference":"C","root":{"label":"C","children":[{"label":"$300"}]}})");
  starqa::EchoChat echo;
  const auto store = starqa::describe_tree(tree, starqa::flatten_paths(tree), echo);
  ASSERT_EQ(store.entries.size(), 1u);
  const auto& d = store.entries.begin()->second;
  EXPECT_NE(d.text.find("C>>$300"), std::string::npos);
  EXPECT_EQ(d.prompt_version, "star-desc-v1");
  EXPECT_EQ(d.source, starqa::DescriptionSource::generated);
  EXPECT_EQ(store.internal.size(), 1u);  // the root
}

TEST(DescribeTree, ParentsCompleteBeforeChildrenStart) {
  const auto tree = three_level_tree();
  for (std::size_t in_flight : {1u, 2u, 8u}) {
    starqa::testing::RecordingChat chat;
    starqa::DescribeOptions options;
    options.max_in_flight = in_flight;
    const auto store = starqa::describe_tree(tree, starqa::flatten_paths(tree), chat, options);
    EXPECT_EQ(store.entries.size(), 4u);
    const auto events = chat.events();
    std::map<std::string, std::size_t> finished, started;
    for (std::size_t i = 0; i < events.size(); ++i) (events[i].start ? started : finished)[events[i].target] = i;
    ASSERT_EQ(started.size(), 10u);  // 1 root + 5 internal + 4 leaves
    for (const auto& [target, at] : started) {
      const auto cut = target.rfind(">>");
      if (cut == std::string::npos) continue;
      ASSERT_LT(finished.at(target.substr(0, cut)), at) << target;
    }
  }
}

TEST(DescribeTree, ChildPromptCarriesParentDescription) {
  const auto tree = three_level_tree();
  starqa::EchoChat echo;
  const auto store = starqa::describe_tree(tree, starqa::flatten_paths(tree), echo);
  const auto* city = store.find(starqa::path_id_for("T>>Venue>>City"));
  const auto* austin = store.find(starqa::path_id_for("T>>Venue>>City>>Austin"));
  ASSERT_TRUE(city && austin);
  EXPECT_NE(austin->text.find("Parent description: " + city->text), std::string::npos);
}

TEST(DescribeTree, CompletenessAndDeterminism) {
  std::mt19937 rng(21);
  for (int i = 0; i < 10; ++i) {
    const auto tree = starqa::testing::random_tree(rng, 4, 4);
    const auto corpus = starqa::flatten_paths(tree);
    starqa::EchoChat echo;
    starqa::DescribeOptions options;
    options.max_in_flight = 1 + static_cast<std::size_t>(i % 4);
    const auto a = starqa::describe_tree(tree, corpus, echo, options);
    const auto b = starqa::describe_tree(tree, corpus, echo);
    std::set<std::string> ids;
    for (const auto& [id, _] : a.entries) ids.insert(id);
    std::set<std::string> expected;
    for (const auto& p : corpus.paths()) expected.insert(p.id());
    EXPECT_EQ(ids, expected);
    EXPECT_EQ(starqa::to_store_file(a), starqa::to_store_file(b));
  }
}

TEST(DescribeTree, EmptyReplyRetriedOnceThenFallback) {
  const auto tree = starqa::ingest_json(R"({"conference":"C","root":{"label":"C"}})");
  ScriptedChat twice_empty({"", "  "});
  const auto store = starqa::describe_tree(tree, starqa::flatten_paths(tree), twice_empty);
  EXPECT_EQ(twice_empty.calls, 2u);
  const auto& d = store.entries.at(starqa::path_id_for("C"));
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.text, "C");

  ScriptedChat recovers({"", "a description"});
  const auto ok = starqa::describe_tree(tree, starqa::flatten_paths(tree), recovers);
  EXPECT_EQ(recovers.calls, 2u);
  EXPECT_FALSE(ok.entries.at(starqa::path_id_for("C")).fallback);
}

TEST(DescribeTree, CorpusFromAnotherTreeRejected) {
  const auto tree = three_level_tree();
  const auto other = starqa::ingest_json(R"({"conference":"T","root":{"label":"T","children":[{"label":"x"}]}})");
  starqa::EchoChat echo;
  EXPECT_THROW(starqa::describe_tree(tree, starqa::flatten_paths(other), echo), starqa::MismatchError);
}

TEST(DescribeTree, PermanentFailureKeepsCompletedEntries) {
  const auto tree = three_level_tree();
  const auto file = scratch("failure.jsonl");
  starqa::testing::RecordingChat chat;
  chat.fail_target = "T>>Venue>>City";
  starqa::DescribeOptions options;
  options.store_file = file;
  options.max_in_flight = 1;
  EXPECT_THROW(starqa::describe_tree(tree, starqa::flatten_paths(tree), chat, options), starqa::TransportError);
  EXPECT_FALSE(fs::exists(file));
  const auto journal = starqa::io::read_file(fs::path(file.string() + ".journal"));
  for (const auto& done : chat.completed()) {
    EXPECT_NE(journal.find("\"prefix\":\"" + done + "\""), std::string::npos) << done;
  }
  EXPECT_EQ(chat.completed().size(), 5u);  // T, Dates, Venue, Paper, Camera
}

TEST(DescribeTree, CrashResumeHasNoDuplicateGenerations) {
  const auto tree = three_level_tree();
  const auto corpus = starqa::flatten_paths(tree);
  for (long crash_after : {0L, 1L, 3L, 5L, 8L}) {
    const auto file = scratch("resume.jsonl");
    starqa::DescribeOptions options;
    options.store_file = file;
    options.max_in_flight = 3;

    starqa::testing::RecordingChat first;
    first.fail_from = crash_after;
    EXPECT_ANY_THROW(starqa::describe_tree(tree, corpus, first, options));

    starqa::testing::RecordingChat second;
    const auto store = starqa::describe_tree(tree, corpus, second, options);
    const auto before = first.completed();
    const auto after = second.completed();
    std::multiset<std::string> all(before.begin(), before.end());
    all.insert(after.begin(), after.end());
    EXPECT_EQ(all.size(), 10u) << crash_after;
    EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), 10u) << crash_after;
    EXPECT_EQ(store.entries.size(), 4u);
    EXPECT_FALSE(fs::exists(fs::path(file.string() + ".journal")));

    starqa::testing::RecordingChat third;
    const auto again = starqa::describe_tree(tree, corpus, third, options);
    EXPECT_EQ(third.calls.load(), 0u);
    EXPECT_EQ(again, store);
  }
}

TEST(DescribeTree, HalfWrittenJournalLineIsIgnored) {
  const auto tree = three_level_tree();
  const auto corpus = starqa::flatten_paths(tree);
  const auto file = scratch("torn.jsonl");
  starqa::DescribeOptions options;
  options.store_file = file;
  starqa::testing::RecordingChat first;
  first.fail_from = 3;
  options.max_in_flight = 1;
  EXPECT_ANY_THROW(starqa::describe_tree(tree, corpus, first, options));
  {
    std::ofstream torn(file.string() + ".journal", std::ios::app | std::ios::binary);
    torn << R"({"path_id":"abc","prefix":"T>>Ven)";
  }
  starqa::testing::RecordingChat second;
  const auto store = starqa::describe_tree(tree, corpus, second, options);
  EXPECT_EQ(second.calls.load(), 7u);
  EXPECT_EQ(store.entries.size(), 4u);
  EXPECT_NO_THROW(starqa::load_store(file));
}

TEST(DescribeTree, StructuralChangeInvalidatesDependents) {
  const auto file = scratch("invalidate.jsonl");
  starqa::DescribeOptions options;
  options.store_file = file;
  auto tree = three_level_tree();
  starqa::testing::RecordingChat first;
  starqa::describe_tree(tree, starqa::flatten_paths(tree), first, options);

  // A new sibling under City changes the context of Austin and Texas only.
  tree.root.children[1].children[0].children.push_back({"Dallas", {}});
  starqa::testing::RecordingChat second;
  starqa::describe_tree(tree, starqa::flatten_paths(tree), second, options);
  auto regenerated = second.completed();
  std::sort(regenerated.begin(), regenerated.end());
  EXPECT_EQ(regenerated, (Labels{"T>>Venue>>City>>Austin", "T>>Venue>>City>>Dallas", "T>>Venue>>City>>Texas"}));
}

TEST(DescriptionStoreFile, RoundTrip) {
  const auto tree = three_level_tree();
  starqa::EchoChat echo;
  const auto store = starqa::describe_tree(tree, starqa::flatten_paths(tree), echo);
  const auto file = scratch("roundtrip.jsonl");
  starqa::save_store(store, file);
  const auto loaded = starqa::load_store(file);
  EXPECT_EQ(loaded, store);
  for (const auto& [id, d] : loaded.entries) EXPECT_EQ(d.source, starqa::DescriptionSource::cached);
  EXPECT_EQ(starqa::to_store_file(loaded), starqa::to_store_file(store));
}

TEST(DescriptionStoreFile, TruncatedIsCorrupt) {
  const auto tree = three_level_tree();
  starqa::EchoChat echo;
  const auto text = starqa::to_store_file(starqa::describe_tree(tree, starqa::flatten_paths(tree), echo));
  EXPECT_THROW(starqa::parse_store(text.substr(0, text.size() / 2)), starqa::CorruptFileError);
  const auto last_line = text.rfind('\n', text.size() - 2);
  EXPECT_THROW(starqa::parse_store(text.substr(0, last_line + 1)), starqa::CorruptFileError);
  EXPECT_THROW(starqa::parse_store(""), starqa::CorruptFileError);
  EXPECT_THROW(starqa::parse_store("{\"format\":\"other\"}\n"), starqa::CorruptFileError);
}

TEST(DescriptionStoreFile, StrictVersionGateNamesBothVersions) {
  const auto tree = three_level_tree();
  starqa::EchoChat echo;
  starqa::DescribeOptions options;
  options.prompt_version = "star-desc-v0";
  const auto text = starqa::to_store_file(starqa::describe_tree(tree, starqa::flatten_paths(tree), echo, options));
  try {
    starqa::parse_store(text, "star-desc-v1", starqa::VersionPolicy::strict);
    FAIL() << "expected VersionMismatchError";
  } catch (const starqa::VersionMismatchError& e) {
    const std::string message = e.what();
    EXPECT_NE(message.find("star-desc-v0"), std::string::npos);
    EXPECT_NE(message.find("star-desc-v1"), std::string::npos);
  }
  EXPECT_NO_THROW(starqa::parse_store(text, "star-desc-v1", starqa::VersionPolicy::warn));
}
