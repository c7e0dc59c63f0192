#include "starqa/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include "starqa/config.hpp"
#include "starqa/errors.hpp"
#include "starqa/evaluation.hpp"
#include "starqa/io.hpp"
#include "starqa/mock_backends.hpp"

namespace starqa::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

fs::path tree_file(const fs::path& data_dir, std::string_view conference) {
  return data_dir / (std::string(conference) + ".tree.json");
}

fs::path paths_file(const fs::path& data_dir, std::string_view conference) {
  return data_dir / (std::string(conference) + ".paths");
}

fs::path store_file(const fs::path& data_dir, std::string_view conference) {
  return data_dir / (std::string(conference) + ".descriptions.jsonl");
}

fs::path index_file(const fs::path& data_dir, std::string_view conference, IndexMode mode) {
  return data_dir / (std::string(conference) + "." + std::string(to_string(mode)) + ".index");
}

namespace {

PathCorpus load_corpus_checked(const fs::path& data_dir, std::string_view conference) {
  const auto file = paths_file(data_dir, conference);
  if (!fs::exists(file)) {
    throw NotFoundError("no knowledge for conference '" + std::string(conference) + "': " + file.string() +
                        " is missing (run ingest and flatten)");
  }
  auto corpus = load_paths_file(file, std::string(conference));
  const auto tree = tree_file(data_dir, conference);
  if (fs::exists(tree) && flatten_paths(load_tree_file(tree)).content_hash() != corpus.content_hash()) {
    throw MismatchError(file.string() + " is stale relative to " + tree.string() + " (re-run flatten)");
  }
  return corpus;
}

}  // namespace

ConferenceKnowledge load_knowledge(const fs::path& data_dir, std::string_view conference) {
  ConferenceKnowledge knowledge;
  knowledge.corpus = load_corpus_checked(data_dir, conference);
  if (const auto file = store_file(data_dir, conference); fs::exists(file)) {
    auto store = load_store(file);
    if (store.corpus_hash != knowledge.corpus.content_hash()) {
      throw MismatchError(file.string() + " was generated for another corpus (re-run describe)");
    }
    knowledge.store = std::move(store);
  }
  if (const auto file = index_file(data_dir, conference, IndexMode::path_text); fs::exists(file)) {
    knowledge.path_index = load_index(file, knowledge.corpus);
  }
  if (const auto file = index_file(data_dir, conference, IndexMode::description_text); fs::exists(file)) {
    knowledge.description_index = load_index(file, knowledge.corpus);
  }
  knowledge.prepare_lexical();
  return knowledge;
}

namespace {

struct Overrides {
  std::optional<std::string> data_dir, cache_dir, retriever, embedder, generator, describer, judge, prompt_version;
  std::optional<std::string> base_url, chat_model, embed_model;
  std::optional<std::size_t> k, concurrency, batch_size;
  std::optional<double> bm25_k1, bm25_b;
  bool strict = false;

  void apply(RunConfig& c) const {
    if (data_dir) c.data_dir = *data_dir;
    if (cache_dir) c.cache_dir = *cache_dir;
    if (retriever) c.retriever.retriever = parse_retriever(*retriever);
    if (embedder) c.embedder = *embedder;
    if (generator) c.generator = *generator;
    if (describer) c.describer = *describer;
    if (judge) c.judge = *judge;
    if (prompt_version) c.prompt_version = *prompt_version;
    if (base_url) c.provider.base_url = *base_url;
    if (chat_model) c.provider.chat_model = *chat_model;
    if (embed_model) c.provider.embed_model = *embed_model;
    if (k) c.retriever.k = *k;
    if (concurrency) c.concurrency = *concurrency;
    if (batch_size) c.batch_size = *batch_size;
    if (bm25_k1) c.retriever.bm25_k1 = *bm25_k1;
    if (bm25_b) c.retriever.bm25_b = *bm25_b;
    if (strict) c.strict = true;
  }
};

/// Backends are created on first use so offline commands never touch the
/// network configuration.
class Backends {
 public:
  explicit Backends(const RunConfig& config) : config_(config) {}

  ChatBackend& chat(const std::string& kind) {
    if (kind == "echo") return echo_;
    if (kind == "extractive") return extractive_;
    return provider();
  }

  EmbeddingBackend& embedder() {
    if (config_.embedder == "mock") return bow_;
    return provider();
  }

 private:
  OpenAIClient& provider() {
    if (!provider_) {
      auto cache = std::make_shared<ResponseCache>(config_.effective_cache_dir());
      provider_ = std::make_unique<OpenAIClient>(
          config_.provider, make_http_transport(config_.provider.base_url, config_.provider.timeout), cache);
    }
    return *provider_;
  }

  const RunConfig& config_;
  EchoChat echo_;
  ExtractiveMockChat extractive_;
  HashedBowEmbedder bow_;
  std::unique_ptr<OpenAIClient> provider_;
};

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_error(std::ostream& err, std::string_view kind, std::string_view message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Question answering over tree-structured conference knowledge", "starqa"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  bool show_config = false;
  Overrides ov;
  app.add_option("--config", config_path, "INI config file with [provider] and [run] sections");
  app.add_flag("--show-config", show_config, "Print the effective configuration as JSON");
  app.add_option("--data-dir", ov.data_dir, "Directory holding pipeline artifacts");
  app.add_option("--cache-dir", ov.cache_dir, "Response cache directory");
  app.add_option("--embedder", ov.embedder, "mock | provider");
  app.add_option("--base-url", ov.base_url, "OpenAI-compatible endpoint");
  app.add_option("--chat-model", ov.chat_model);
  app.add_option("--embed-model", ov.embed_model);
  app.add_option("--concurrency", ov.concurrency, "In-flight request limit");
  app.add_flag("--strict", ov.strict, "Fail on prompt-version mismatch and empty retrievals");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert a source document into a tree file");
  std::optional<std::string> conference_opt;
  std::string json_in, nested_in, html_in;
  ingest->add_option("--conference", conference_opt, "Conference id (root label)");
  auto* json_opt = ingest->add_option("--json", json_in, "Canonical tree document");
  auto* nested_opt = ingest->add_option("--nested", nested_in, "Tree stored as nested JSON objects");
  auto* html_opt = ingest->add_option("--html", html_in, "HTML page (heading outline)");
  json_opt->excludes(nested_opt)->excludes(html_opt);
  nested_opt->excludes(html_opt);

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Path count and depth of tree files");
  std::vector<std::string> stats_conferences;
  std::vector<std::string> stats_trees;
  stats_cmd->add_option("conferences", stats_conferences, "Conference ids in the data directory");
  stats_cmd->add_option("--tree", stats_trees, "Explicit tree files");

  // flatten
  auto* flatten_cmd = app.add_subcommand("flatten", "Write the root-to-leaf paths file");
  std::string conference;
  flatten_cmd->add_option("--conference", conference)->required();

  // describe
  auto* describe_cmd = app.add_subcommand("describe", "Generate structure-aware path descriptions");
  describe_cmd->add_option("--conference", conference)->required();
  describe_cmd->add_option("--describer", ov.describer, "echo | provider");
  describe_cmd->add_option("--prompt-version", ov.prompt_version, "Pin the description prompt version");

  // index
  auto* index_cmd = app.add_subcommand("index", "Embed paths or descriptions into a vector index");
  std::string index_mode = "path_text";
  index_cmd->add_option("--conference", conference)->required();
  index_cmd->add_option("--mode", index_mode, "path_text | description_text");
  index_cmd->add_option("--batch-size", ov.batch_size);

  auto add_retrieval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--retriever", ov.retriever, "dense_path | dense_description | bm25_path | bm25_description");
    cmd->add_option("--k", ov.k, "Number of paths retrieved");
    cmd->add_option("--bm25-k1", ov.bm25_k1);
    cmd->add_option("--bm25-b", ov.bm25_b);
    cmd->add_option("--generator", ov.generator, "echo | extractive | provider");
  };

  // ask
  auto* ask_cmd = app.add_subcommand("ask", "Answer one question");
  std::string question;
  bool explain = false;
  std::string record_out;
  ask_cmd->add_option("--conference", conference)->required();
  add_retrieval_flags(ask_cmd);
  ask_cmd->add_flag("--explain", explain, "Also print the ranked paths and scores");
  ask_cmd->add_option("--record", record_out, "Write the replayable answer record (JSON)");
  ask_cmd->add_option("question", question)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate QA pairs and write a stratified report");
  std::string pairs_file;
  std::vector<std::string> modes{"dense_path"};
  std::string report_prefix;
  eval_cmd->add_option("--pairs", pairs_file, "QA pairs file (JSON lines)")->required();
  eval_cmd->add_option("--modes", modes, "Comma-separated retrievers")->delimiter(',');
  eval_cmd->add_option("--out", report_prefix, "Report path prefix (writes .json and .txt)");
  eval_cmd->add_option("--judge", ov.judge, "fallback | provider");
  add_retrieval_flags(eval_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return 2;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    ov.apply(config);
    config.validate();
    if (show_config) out << to_json(config).dump(2) << '\n';
    if (app.get_subcommands().empty()) {
      if (show_config) return 0;
      write_error(err, "usage", "A subcommand is required");
      return 2;
    }
    Backends backends(config);
    const auto& dir = config.data_dir;

    if (*ingest) {
      KnowledgeTree tree;
      if (!json_in.empty()) {
        tree = load_tree_file(json_in);
        if (conference_opt && *conference_opt != tree.conference_id) {
          throw ValidationError("tree file is for '" + tree.conference_id + "', not '" + *conference_opt + "'");
        }
      } else if (!nested_in.empty()) {
        if (!conference_opt) throw ConfigError("--nested needs --conference");
        tree = ingest_nested_json(io::read_file(nested_in), *conference_opt);
      } else if (!html_in.empty()) {
        tree = ingest_html_headings(io::read_file(html_in));
        if (conference_opt && *conference_opt != tree.conference_id) {
          // Keep the page outline intact under the requested conference root.
          KnowledgeTree wrapped{*conference_opt, TreeNode{*conference_opt, {std::move(tree.root)}}};
          validate(wrapped);
          tree = std::move(wrapped);
        }
      } else {
        throw ConfigError("ingest needs one of --json, --nested, --html");
      }
      const auto file = tree_file(dir, tree.conference_id);
      save_tree_file(tree, file);
      out << "wrote " << file.string() << " (" << count_leaves(tree.root) << " paths)\n";
      return 0;
    }

    if (*stats_cmd) {
      std::vector<std::pair<std::string, fs::path>> inputs;
      for (const auto& c : stats_conferences) inputs.emplace_back(c, tree_file(dir, c));
      for (const auto& t : stats_trees) inputs.emplace_back("", t);
      if (inputs.empty()) throw ConfigError("stats needs conference ids or --tree files");
      out << "conference\tpaths\tavg_depth_nodes\tavg_depth_edges\tmax_depth_nodes\n";
      for (const auto& [name, file] : inputs) {
        const auto tree = load_tree_file(file);
        const auto s = stats(tree);
        char line[256];
        std::snprintf(line, sizeof line, "%s\t%zu\t%.2f\t%.2f\t%zu\n", tree.conference_id.c_str(), s.path_count,
                      s.avg_depth, s.avg_edge_depth(), s.max_depth);
        out << line;
      }
      out << "# depth counts nodes from root to leaf inclusive; avg_depth_edges = avg_depth_nodes - 1\n";
      return 0;
    }

    if (*flatten_cmd) {
      const auto tree = load_tree_file(tree_file(dir, conference));
      const auto corpus = flatten_paths(tree);
      const auto file = paths_file(dir, conference);
      save_paths_file(corpus, file);
      out << "wrote " << file.string() << " (" << corpus.size() << " paths, corpus " << corpus.content_hash().substr(0, 12)
          << ")\n";
      return 0;
    }

    if (*describe_cmd) {
      const auto tree = load_tree_file(tree_file(dir, conference));
      const auto corpus = load_corpus_checked(dir, conference);
      const auto file = store_file(dir, conference);
      if (config.strict && fs::exists(file)) {
        load_store(file, config.prompt_version, VersionPolicy::strict);
      }
      DescribeOptions options;
      options.max_in_flight = config.concurrency;
      options.store_file = file;
      options.prompt_version = config.prompt_version;
      std::size_t generated = 0;
      std::mutex progress_mutex;
      options.on_progress = [&](const PathDescription& d) {
        if (d.source == DescriptionSource::generated) {
          std::lock_guard lock(progress_mutex);
          ++generated;
        }
      };
      const auto store = describe_tree(tree, corpus, backends.chat(config.describer), options);
      out << "wrote " << file.string() << " (" << store.entries.size() << " leaf descriptions, "
          << store.internal.size() << " internal, " << generated << " generated)\n";
      return 0;
    }

    if (*index_cmd) {
      const auto mode = parse_index_mode(index_mode);
      const auto corpus = load_corpus_checked(dir, conference);
      std::vector<IndexText> texts;
      if (mode == IndexMode::path_text) {
        texts = path_texts(corpus);
      } else {
        const auto sfile = store_file(dir, conference);
        if (!fs::exists(sfile)) {
          throw ConfigError("description_text index needs " + sfile.string() + " (run describe first)");
        }
        const auto store =
            load_store(sfile, config.prompt_version, config.strict ? VersionPolicy::strict : VersionPolicy::warn);
        if (store.corpus_hash != corpus.content_hash()) {
          throw MismatchError(sfile.string() + " was generated for another corpus (re-run describe)");
        }
        texts = description_texts(corpus, store);
      }
      const auto index = build_index(texts, backends.embedder(), mode, corpus.content_hash(), config.batch_size);
      const auto file = index_file(dir, conference, mode);
      save_index(index, file);
      out << "wrote " << file.string() << " (" << index.size() << " vectors, dim " << index.dim() << ", "
          << index.embedder_id() << ")\n";
      return 0;
    }

    if (*ask_cmd) {
      KnowledgeRegistry registry;
      registry.add(load_knowledge(dir, conference));
      const bool dense = config.retriever.retriever == RetrieverKind::dense_path ||
                         config.retriever.retriever == RetrieverKind::dense_description;
      const auto record = answer(Query{question, conference}, registry, config.retriever,
                                 backends.chat(config.generator), dense ? &backends.embedder() : nullptr,
                                 config.strict ? EmptyRetrieval::reject : EmptyRetrieval::allow);
      out << record.answer << '\n';
      if (explain) {
        out << "retrieved (" << to_string(record.retrieved.config.retriever) << ", k=" << record.retrieved.config.k
            << "):\n";
        for (std::size_t i = 0; i < record.retrieved.ranked.size(); ++i) {
          const auto& item = record.retrieved.ranked[i];
          out << "  " << (i + 1) << ". " << format_score(item.score) << "  " << item.path.serialized() << '\n';
        }
      }
      if (!record_out.empty()) io::write_file_atomic(record_out, to_json(record).dump(2) + "\n");
      return 0;
    }

    if (*eval_cmd) {
      const auto pairs = load_pairs_file(pairs_file);
      EvalConfig eval_config;
      eval_config.modes.clear();
      for (const auto& m : modes) eval_config.modes.push_back(parse_retriever(m));
      eval_config.retriever = config.retriever;
      eval_config.max_in_flight = config.concurrency;

      std::set<std::string> conferences;
      for (const auto& p : pairs) conferences.insert(p.conference_id);
      KnowledgeRegistry registry;
      for (const auto& c : conferences) {
        auto knowledge = load_knowledge(dir, c);
        for (auto m : eval_config.modes) {
          if (uses_descriptions(m) && !knowledge.store) {
            throw ConfigError(std::string(to_string(m)) + " needs a description store for " + c +
                              " (run describe)");
          }
        }
        registry.add(std::move(knowledge));
      }
      const bool any_dense = std::any_of(eval_config.modes.begin(), eval_config.modes.end(), [](RetrieverKind m) {
        return m == RetrieverKind::dense_path || m == RetrieverKind::dense_description;
      });
      std::unique_ptr<Judge> judge;
      if (config.judge == "provider") {
        judge = std::make_unique<LlmJudge>(backends.chat("provider"));
      } else {
        judge = std::make_unique<FallbackJudge>();
      }
      const auto report = evaluate_dataset(pairs, registry, eval_config, backends.chat(config.generator),
                                           any_dense ? &backends.embedder() : nullptr, *judge);
      const auto table = render_table(report);
      const fs::path prefix = report_prefix.empty() ? dir / "eval" : fs::path(report_prefix);
      auto json_file = prefix;
      json_file += ".json";
      auto table_file = prefix;
      table_file += ".txt";
      io::write_file_atomic(json_file, to_json(report).dump(2) + "\n");
      io::write_file_atomic(table_file, table);
      out << table;
      out << "wrote " << json_file.string() << " and " << table_file.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    write_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace starqa::cli
