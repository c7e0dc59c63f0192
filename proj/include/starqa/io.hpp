#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace starqa::io {

std::string read_file(const std::filesystem::path& file);

/// Writes through a temporary sibling file and renames it into place, so a
/// reader never observes a half-written artifact.
void write_file_atomic(const std::filesystem::path& file, std::string_view content);

}  // namespace starqa::io
