#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ccml {

std::string sha1_hex(std::span<const std::uint8_t> bytes);
std::string sha1_hex(std::string_view text);

/// SHA-1 over "blob <len>\0<bytes>", i.e. the object id git assigns to a blob.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);

}  // namespace ccml
