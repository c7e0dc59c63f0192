#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "starqa/describer.hpp"
#include "starqa/gateway.hpp"
#include "starqa/retrieval.hpp"

namespace starqa {

/// Effective settings of one CLI invocation: config file values, then
/// command-line flags on top.
struct RunConfig {
  ProviderConfig provider;
  std::filesystem::path data_dir = ".";
  std::filesystem::path cache_dir;  // empty = <data_dir>/cache
  RetrieverConfig retriever;
  std::size_t concurrency = 8;
  std::size_t batch_size = 64;
  std::string embedder = "mock";        // mock | provider
  std::string generator = "extractive"; // echo | extractive | provider
  std::string describer = "echo";       // echo | provider
  std::string judge = "fallback";       // fallback | provider
  std::string prompt_version{kDescriptionPromptVersion};
  bool strict = false;

  std::filesystem::path effective_cache_dir() const;
  void validate() const;
};

/// Reads an INI file with [provider] and [run] sections. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
RunConfig load_run_config(const std::filesystem::path& file);

/// Never includes the API key itself, only the variable name.
nlohmann::json to_json(const RunConfig& config);

}  // namespace starqa
