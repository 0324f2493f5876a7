#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cellgate {

using Bytes = std::vector<std::uint8_t>;

// Uppercase hex, no separators.
std::string to_hex(std::span<const std::uint8_t> bytes);
// Accepts either case; throws Errc::bad_hex on odd length or non-hex digits.
Bytes from_hex(std::string_view hex);

// UTF-8 <-> code points. Invalid sequences throw Errc::invalid_argument.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);
void utf8_append(std::string& out, char32_t cp);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;
std::string to_upper(std::string_view s);

// Splits a comma-separated AT parameter list, honouring double quotes.
// Quoted items are returned without the quotes.
std::vector<std::string> split_at_params(std::string_view s);

std::optional<long long> parse_int(std::string_view s) noexcept;

// ISO-8601 UTC, second resolution.
std::string iso8601_now();

}  // namespace cellgate
