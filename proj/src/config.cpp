#include "starqa/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <set>

#include "starqa/errors.hpp"

namespace starqa {

namespace pt = boost::property_tree;

std::filesystem::path RunConfig::effective_cache_dir() const {
  return cache_dir.empty() ? data_dir / "cache" : cache_dir;
}

void RunConfig::validate() const {
  provider.validate();
  retriever.validate();
  if (concurrency == 0) throw ConfigError("concurrency must be >= 1");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  auto one_of = [](const std::string& name, const std::string& value, std::set<std::string> allowed) {
    if (!allowed.contains(value)) throw ConfigError("unknown " + name + " backend '" + value + "'");
  };
  one_of("embedder", embedder, {"mock", "provider"});
  one_of("generator", generator, {"echo", "extractive", "provider"});
  one_of("describer", describer, {"echo", "provider"});
  one_of("judge", judge, {"fallback", "provider"});
}

RunConfig load_run_config(const std::filesystem::path& file) {
  pt::ptree tree;
  try {
    pt::read_ini(file.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("cannot read config " + file.string() + ": " + e.what());
  }
  RunConfig config;
  try {
    for (const auto& [section, values] : tree) {
      if (section == "provider") {
        for (const auto& [key, value] : values) {
          auto& p = config.provider;
          if (key == "base_url") p.base_url = value.get_value<std::string>();
          else if (key == "api_key_env") p.api_key_env = value.get_value<std::string>();
          else if (key == "chat_model") p.chat_model = value.get_value<std::string>();
          else if (key == "embed_model") p.embed_model = value.get_value<std::string>();
          else if (key == "timeout") p.timeout = std::chrono::milliseconds(static_cast<long long>(value.get_value<double>() * 1000));
          else if (key == "max_retries") p.max_retries = value.get_value<int>();
          else if (key == "rate_limit") p.rate_limit = value.get_value<double>();
          else if (key == "embed_batch") p.embed_batch = value.get_value<std::size_t>();
          else if (key == "api_key") throw ConfigError("API keys are read from the environment only; set api_key_env");
          else throw ConfigError("unknown key provider." + key);
        }
      } else if (section == "run") {
        for (const auto& [key, value] : values) {
          if (key == "data_dir") config.data_dir = value.get_value<std::string>();
          else if (key == "cache_dir") config.cache_dir = value.get_value<std::string>();
          else if (key == "retriever") config.retriever.retriever = parse_retriever(value.get_value<std::string>());
          else if (key == "k") config.retriever.k = value.get_value<std::size_t>();
          else if (key == "bm25_k1") config.retriever.bm25_k1 = value.get_value<double>();
          else if (key == "bm25_b") config.retriever.bm25_b = value.get_value<double>();
          else if (key == "concurrency") config.concurrency = value.get_value<std::size_t>();
          else if (key == "batch_size") config.batch_size = value.get_value<std::size_t>();
          else if (key == "embedder") config.embedder = value.get_value<std::string>();
          else if (key == "generator") config.generator = value.get_value<std::string>();
          else if (key == "describer") config.describer = value.get_value<std::string>();
          else if (key == "judge") config.judge = value.get_value<std::string>();
          else if (key == "prompt_version") config.prompt_version = value.get_value<std::string>();
          else if (key == "strict") config.strict = value.get_value<bool>();
          else throw ConfigError("unknown key run." + key);
        }
      } else {
        throw ConfigError("unknown config section [" + section + "]");
      }
    }
  } catch (const pt::ptree_bad_data& e) {
    throw ConfigError("bad value in " + file.string() + ": " + e.what());
  }
  config.validate();
  return config;
}

nlohmann::json to_json(const RunConfig& config) {
  const auto& p = config.provider;
  return nlohmann::json{
      {"provider",
       {{"base_url", p.base_url},
        {"api_key_env", p.api_key_env},
        {"chat_model", p.chat_model},
        {"embed_model", p.embed_model},
        {"timeout_s", static_cast<double>(p.timeout.count()) / 1000.0},
        {"max_retries", p.max_retries},
        {"rate_limit", p.rate_limit},
        {"embed_batch", p.embed_batch}}},
      {"run",
       {{"data_dir", config.data_dir.string()},
        {"cache_dir", config.effective_cache_dir().string()},
        {"retriever", to_string(config.retriever.retriever)},
        {"k", config.retriever.k},
        {"bm25_k1", config.retriever.bm25_k1},
        {"bm25_b", config.retriever.bm25_b},
        {"concurrency", config.concurrency},
        {"batch_size", config.batch_size},
        {"embedder", config.embedder},
        {"generator", config.generator},
        {"describer", config.describer},
        {"judge", config.judge},
        {"prompt_version", config.prompt_version},
        {"strict", config.strict}}}};
}

}  // namespace starqa
