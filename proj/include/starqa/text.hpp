#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace starqa::text {

/// Answer/query tokenization shared by token F1, BM25 and the mock embedder:
/// ASCII-lowercase, split on Unicode whitespace, strip edge punctuation,
/// drop empty tokens. Currency and percent signs are not punctuation here,
/// so "$300." becomes "$300".
std::vector<std::string> tokenize(std::string_view input);

/// Same as tokenize() but the path separator `>>` also splits tokens.
std::vector<std::string> tokenize_path_text(std::string_view input);

/// Tokens joined by single spaces.
std::string normalize(std::string_view input);

/// Trims ASCII and Unicode whitespace from both ends.
std::string trim(std::string_view input);

/// Collapses every run of Unicode whitespace into one ASCII space and trims.
std::string collapse_whitespace(std::string_view input);

/// Truncates to at most `max_chars` code points, appending "..." when cut.
std::string truncate_for_prompt(std::string_view input, std::size_t max_chars);

}  // namespace starqa::text
