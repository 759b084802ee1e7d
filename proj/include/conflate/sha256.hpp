#pragma once

#include <string>
#include <string_view>

namespace conflate {

/// Lowercase hex SHA-256 of the bytes in `data`.
std::string sha256_hex(std::string_view data);

}  // namespace conflate
