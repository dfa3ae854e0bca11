#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace modpipe {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);

/// SHA-256 over length-prefixed parts, so ("ab","c") and ("a","bc") differ.
Sha256 sha256_parts(std::initializer_list<std::string_view> parts);

std::string to_hex(const Sha256& digest);

/// First eight digest bytes as a little-endian integer; used for seeding.
std::uint64_t digest_seed(const Sha256& digest);

std::string base64_encode(std::string_view bytes);

}  // namespace modpipe
