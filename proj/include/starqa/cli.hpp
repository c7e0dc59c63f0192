#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "starqa/qa.hpp"

namespace starqa::cli {

/// Artifact locations inside a data directory.
std::filesystem::path tree_file(const std::filesystem::path& data_dir, std::string_view conference);
std::filesystem::path paths_file(const std::filesystem::path& data_dir, std::string_view conference);
std::filesystem::path store_file(const std::filesystem::path& data_dir, std::string_view conference);
std::filesystem::path index_file(const std::filesystem::path& data_dir, std::string_view conference, IndexMode mode);

/// Loads every artifact present for `conference`. The paths file is
/// required; a description store or index that was built from another
/// corpus raises MismatchError.
ConferenceKnowledge load_knowledge(const std::filesystem::path& data_dir, std::string_view conference);

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 on success, 1 on a runtime error, 2 on a usage error.
/// Errors are written to `err` as a single JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace starqa::cli
