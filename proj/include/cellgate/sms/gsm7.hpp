#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cellgate/util.hpp"

namespace cellgate::sms {

inline constexpr std::uint8_t kGsm7Escape = 0x1B;

// Septet codes for `text`; extension-table characters become ESC + code.
// Throws Error(unmappable_character) for anything outside the default alphabet.
std::vector<std::uint8_t> to_gsm7_septets(std::string_view utf8);
std::string from_gsm7_septets(std::span<const std::uint8_t> septets);

bool is_gsm7(std::string_view utf8) noexcept;
// Septets needed for one code point (1, 2 for the extension table), nullopt if unmappable.
std::optional<int> gsm7_cost(char32_t cp) noexcept;

// LSB-first septet packing starting `bit_offset` bits into the output.
Bytes pack_septets(std::span<const std::uint8_t> septets, std::size_t bit_offset = 0);
std::vector<std::uint8_t> unpack_septets(std::span<const std::uint8_t> packed, std::size_t count,
                                         std::size_t bit_offset = 0);

struct Gsm7Packed {
  Bytes bytes;
  std::size_t septets = 0;
};

Gsm7Packed pack_gsm7(std::string_view utf8);
// Throws Error(length_mismatch) unless packed.size() == ceil(7 * septets / 8).
std::string unpack_gsm7(std::span<const std::uint8_t> packed, std::size_t septets);

}  // namespace cellgate::sms
