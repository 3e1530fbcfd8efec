#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small UTF-8 and string helpers shared across modules.
namespace detox::text {

std::string_view trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

/// Splits into code points, each re-encoded as its own UTF-8 string.
std::vector<std::string> split_code_points(std::string_view s);

/// ASCII-only lowercase; non-ASCII bytes pass through untouched.
std::string ascii_lower(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace detox::text
