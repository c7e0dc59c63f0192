#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace starqa {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms; used where a cheap
/// non-cryptographic hash is enough (mock embedder buckets).
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace starqa
