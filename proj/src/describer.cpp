#include "starqa/describer.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "starqa/errors.hpp"
#include "starqa/hash.hpp"
#include "starqa/io.hpp"
#include "starqa/text.hpp"

namespace starqa {

using json = nlohmann::json;

namespace {

constexpr std::string_view kStoreFormat = "starqa-descriptions/1";
constexpr std::string_view kJournalFormat = "starqa-description-journal/1";

std::string limit_value(std::string_view value) { return text::truncate_for_prompt(value, kPromptValueLimit); }

json record_of(const PathDescription& d, bool leaf) {
  return json{{"path_id", d.path_id},
              {"prefix", serialize(d.prefix)},
              {"text", d.text},
              {"prompt_version", d.prompt_version},
              {"kind", leaf ? "leaf" : "internal"},
              {"fallback", d.fallback},
              {"cache_key", d.cache_key}};
}

PathDescription description_of(const json& record) {
  PathDescription d;
  d.path_id = record.at("path_id").get<std::string>();
  d.prefix = parse(record.at("prefix").get<std::string>()).labels();
  d.text = record.at("text").get<std::string>();
  d.prompt_version = record.at("prompt_version").get<std::string>();
  d.fallback = record.value("fallback", false);
  d.cache_key = record.value("cache_key", std::string{});
  d.source = DescriptionSource::cached;
  if (d.text.empty()) throw CorruptFileError("empty description text for " + d.path_id);
  if (path_id_for(serialize(d.prefix)) != d.path_id) {
    throw CorruptFileError("path_id does not match prefix for " + d.path_id);
  }
  return d;
}

struct Job {
  const TreeNode* node;
  const TreeNode* parent;
  std::vector<std::string> prefix;
  std::string parent_id;
};

class Journal {
 public:
  Journal(const std::filesystem::path& file, const json& header) : file_(file) {
    if (file_.empty()) return;
    const bool fresh = !std::filesystem::exists(file_) || std::filesystem::file_size(file_) == 0;
    bool needs_newline = false;
    if (!fresh) {
      std::ifstream in(file_, std::ios::binary);
      in.seekg(-1, std::ios::end);
      char last = '\n';
      in.get(last);
      needs_newline = last != '\n';
    }
    out_.open(file_, std::ios::binary | std::ios::app);
    if (!out_) throw Error("io", "cannot open journal " + file_.string());
    if (needs_newline) out_ << '\n';
    if (fresh) out_ << header.dump() << '\n';
    out_.flush();
  }

  void append(const PathDescription& d, bool leaf) {
    if (file_.empty()) return;
    std::lock_guard lock(mutex_);
    out_ << record_of(d, leaf).dump() << '\n';
    out_.flush();
  }

  void remove() {
    if (file_.empty()) return;
    out_.close();
    std::filesystem::remove(file_);
  }

 private:
  std::filesystem::path file_;
  std::ofstream out_;
  std::mutex mutex_;
};

// Previously completed descriptions, from the final store and the journal.
std::map<std::string, PathDescription> load_reusable(const DescribeOptions& options) {
  std::map<std::string, PathDescription> reusable;
  if (options.store_file.empty()) return reusable;
  if (std::filesystem::exists(options.store_file)) {
    try {
      auto store = load_store(options.store_file, options.prompt_version, VersionPolicy::warn);
      for (auto* part : {&store.entries, &store.internal}) {
        for (auto& [id, d] : *part) reusable[id] = std::move(d);
      }
    } catch (const Error& e) {
      std::cerr << "warning: ignoring unreadable description store: " << e.what() << '\n';
    }
  }
  auto journal = options.store_file;
  journal += ".journal";
  if (std::filesystem::exists(journal)) {
    std::ifstream in(journal, std::ios::binary);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      try {
        auto d = description_of(json::parse(line));
        reusable[d.path_id] = std::move(d);
      } catch (const std::exception&) {
        // A crash can leave the final line half-written.
      }
    }
  }
  return reusable;
}

}  // namespace

const PathDescription* DescriptionStore::find(std::string_view path_id) const {
  const std::string key(path_id);
  if (auto it = entries.find(key); it != entries.end()) return &it->second;
  if (auto it = internal.find(key); it != internal.end()) return &it->second;
  return nullptr;
}

bool operator==(const PathDescription& a, const PathDescription& b) {
  return a.path_id == b.path_id && a.prefix == b.prefix && a.text == b.text && a.prompt_version == b.prompt_version &&
         a.fallback == b.fallback && a.cache_key == b.cache_key;
}

bool operator==(const DescriptionStore& a, const DescriptionStore& b) {
  return a.conference_id == b.conference_id && a.prompt_version == b.prompt_version &&
         a.corpus_hash == b.corpus_hash && a.entries == b.entries && a.internal == b.internal;
}

std::string_view description_system_prompt() {
  return "You write concise, factual descriptions of entries in an academic conference knowledge tree.";
}

std::string build_description_prompt(const NodeContext& context, const std::optional<std::string>& parent_description) {
  std::vector<std::string> shown;
  shown.reserve(context.target.size());
  for (const auto& label : context.target) shown.push_back(limit_value(label));

  std::string prompt;
  prompt += "Path: " + serialize(shown) + "\n\n";
  if (parent_description) {
    prompt += "Parent path: " + serialize(context.parent_prefix) + "\n";
    prompt += "Parent description: " + *parent_description + "\n\n";
  } else {
    prompt += "This path is the root of the knowledge tree; it has no parent.\n\n";
  }
  if (context.siblings.empty()) {
    prompt += "Siblings: none\n\n";
  } else {
    prompt += "Siblings (" + std::to_string(context.siblings.size() + context.omitted_siblings) + "):\n";
    for (const auto& sibling : context.siblings) prompt += "- " + limit_value(sibling) + "\n";
    if (context.omitted_siblings > 0) {
      prompt += "- ... (" + std::to_string(context.omitted_siblings) + " more)\n";
    }
    prompt += "\n";
  }
  prompt +=
      "Write one standalone paragraph describing what this path denotes. Use the parent description and the "
      "siblings as context, keep every concrete name, date, and value from the path, and reply with the "
      "paragraph only.";
  return prompt;
}

std::string description_cache_key(const NodeContext& context, const std::optional<std::string>& parent_description,
                                   std::string_view prompt_version) {
  std::string siblings;
  for (const auto& s : context.siblings) {
    siblings += s;
    siblings.push_back('\n');
  }
  siblings += "+" + std::to_string(context.omitted_siblings);
  std::string material;
  material += path_id_for(serialize(context.target));
  material += '\n';
  material += parent_description ? sha256_hex(*parent_description) : std::string("-");
  material += '\n';
  material += sha256_hex(siblings);
  material += '\n';
  material += prompt_version;
  return sha256_hex(material);
}

DescriptionStore describe_tree(const KnowledgeTree& tree, const PathCorpus& corpus, ChatBackend& llm,
                               const DescribeOptions& options) {
  if (flatten_paths(tree).content_hash() != corpus.content_hash()) {
    throw MismatchError("path corpus was not derived from tree " + tree.conference_id);
  }
  const std::size_t workers_max = std::max<std::size_t>(1, options.max_in_flight);

  DescriptionStore store;
  store.conference_id = tree.conference_id;
  store.prompt_version = options.prompt_version;
  store.corpus_hash = corpus.content_hash();

  auto reusable = load_reusable(options);
  auto journal_file = options.store_file;
  if (!journal_file.empty()) journal_file += ".journal";
  Journal journal(journal_file, json{{"format", kJournalFormat},
                                     {"conference", tree.conference_id},
                                     {"prompt_version", options.prompt_version},
                                     {"corpus_hash", corpus.content_hash()}});

  std::mutex results_mutex;
  std::map<std::string, const PathDescription*> done;  // path_id -> entry in store

  auto run_job = [&](const Job& job) {
    std::optional<std::string> parent_text;
    if (job.parent != nullptr) {
      std::lock_guard lock(results_mutex);
      parent_text = done.at(job.parent_id)->text;
    }
    const auto context = node_context(*job.node, job.parent, job.prefix);
    PathDescription d;
    d.prefix = job.prefix;
    d.path_id = path_id_for(serialize(job.prefix));
    d.prompt_version = options.prompt_version;
    d.cache_key = description_cache_key(context, parent_text, options.prompt_version);

    bool reused = false;
    if (auto it = reusable.find(d.path_id); it != reusable.end() && it->second.cache_key == d.cache_key) {
      d.text = it->second.text;
      d.fallback = it->second.fallback;
      d.source = DescriptionSource::cached;
      reused = true;
    } else {
      const std::vector<ChatMessage> messages{{"system", std::string(description_system_prompt())},
                                              {"user", build_description_prompt(context, parent_text)}};
      ChatParams params;
      std::string reply = text::trim(llm.chat(messages, params));
      if (reply.empty()) reply = text::trim(llm.chat(messages, params));
      if (reply.empty()) {
        reply = serialize(job.prefix);
        d.fallback = true;
      }
      d.text = std::move(reply);
      d.source = DescriptionSource::generated;
    }

    const bool leaf = job.node->is_leaf();
    if (!reused) journal.append(d, leaf);
    const PathDescription* stored = nullptr;
    {
      std::lock_guard lock(results_mutex);
      auto& bucket = leaf ? store.entries : store.internal;
      const auto id = d.path_id;
      stored = &(bucket[id] = std::move(d));
      done[stored->path_id] = stored;
    }
    if (options.on_progress) options.on_progress(*stored);
  };

  std::vector<Job> level{Job{&tree.root, nullptr, {tree.root.label}, {}}};
  while (!level.empty()) {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      while (!failed.load()) {
        const auto i = next.fetch_add(1);
        if (i >= level.size()) return;
        try {
          run_job(level[i]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    };
    const auto thread_count = std::min(workers_max, level.size());
    if (thread_count <= 1) {
      worker();
    } else {
      std::vector<std::jthread> threads;
      threads.reserve(thread_count);
      for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<Job> children;
    for (const auto& job : level) {
      const auto parent_id = path_id_for(serialize(job.prefix));
      for (const auto& child : job.node->children) {
        auto prefix = job.prefix;
        prefix.push_back(child.label);
        children.push_back(Job{&child, job.node, std::move(prefix), parent_id});
      }
    }
    level = std::move(children);
  }

  for (const auto& path : corpus.paths()) {
    if (!store.entries.contains(path.id())) {
      throw Error("internal", "description missing for " + path.serialized());
    }
  }
  if (!options.store_file.empty()) {
    save_store(store, options.store_file);
    journal.remove();
  }
  return store;
}

std::string to_store_file(const DescriptionStore& store) {
  std::vector<std::pair<std::string, json>> records;
  records.reserve(store.entries.size() + store.internal.size());
  for (const auto& [id, d] : store.entries) records.emplace_back(serialize(d.prefix), record_of(d, true));
  for (const auto& [id, d] : store.internal) records.emplace_back(serialize(d.prefix), record_of(d, false));
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  const json header{{"format", kStoreFormat},
                    {"conference", store.conference_id},
                    {"prompt_version", store.prompt_version},
                    {"corpus_hash", store.corpus_hash},
                    {"records", records.size()}};
  std::string out = header.dump() + "\n";
  for (const auto& [key, record] : records) out += record.dump() + "\n";
  return out;
}

void save_store(const DescriptionStore& store, const std::filesystem::path& file) {
  io::write_file_atomic(file, to_store_file(store));
}

DescriptionStore parse_store(std::string_view content, std::string_view expected_version, VersionPolicy policy) {
  if (content.empty() || content.back() != '\n') throw CorruptFileError("description store is truncated");
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < content.size();) {
    const auto end = content.find('\n', start);
    lines.push_back(content.substr(start, end - start));
    start = end + 1;
  }

  DescriptionStore store;
  std::size_t expected_records = 0;
  try {
    const auto header = json::parse(lines.front());
    if (header.at("format").get<std::string>() != kStoreFormat) {
      throw CorruptFileError("not a description store: format " + header.at("format").dump());
    }
    store.conference_id = header.at("conference").get<std::string>();
    store.prompt_version = header.at("prompt_version").get<std::string>();
    store.corpus_hash = header.at("corpus_hash").get<std::string>();
    expected_records = header.at("records").get<std::size_t>();
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("bad description store header: ") + e.what());
  }
  if (lines.size() - 1 != expected_records) {
    throw CorruptFileError("description store holds " + std::to_string(lines.size() - 1) + " records, header says " +
                           std::to_string(expected_records));
  }
  if (store.prompt_version != expected_version) {
    const auto message = "description store prompt_version '" + store.prompt_version + "' differs from expected '" +
                         std::string(expected_version) + "'";
    if (policy == VersionPolicy::strict) throw VersionMismatchError(message);
    std::cerr << "warning: " << message << '\n';
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    try {
      const auto record = json::parse(lines[i]);
      auto d = description_of(record);
      auto& bucket = record.at("kind").get<std::string>() == "leaf" ? store.entries : store.internal;
      const auto id = d.path_id;
      if (!bucket.emplace(id, std::move(d)).second) throw CorruptFileError("duplicate record " + id);
    } catch (const json::exception& e) {
      throw CorruptFileError("description store line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const ParseError& e) {
      throw CorruptFileError("description store line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw CorruptFileError("description store line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return store;
}

DescriptionStore load_store(const std::filesystem::path& file, std::string_view expected_version,
                            VersionPolicy policy) {
  return parse_store(io::read_file(file), expected_version, policy);
}

}  // namespace starqa
