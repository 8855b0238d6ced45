#pragma once

#include <string>
#include <string_view>

namespace cb {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Name of the digest used by sha256_hex, as recorded in store headers.
inline constexpr std::string_view kDigestName = "sha256";

}  // namespace cb
