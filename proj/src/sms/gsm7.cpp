#include "cellgate/sms/gsm7.hpp"

#include <array>

#include "cellgate/error.hpp"

namespace cellgate::sms {

namespace {

// GSM 03.38 default alphabet; index = septet code.
constexpr std::array<char32_t, 128> kBasic = {
    U'@',  U'£',  U'$',  U'¥',  U'è',  U'é',  U'ù',  U'ì',  U'ò',  U'Ç',  U'\n', U'Ø',  U'ø',  U'\r', U'Å',  U'å',
    U'Δ',  U'_',  U'Φ',  U'Γ',  U'Λ',  U'Ω',  U'Π',  U'Ψ',  U'Σ',  U'Θ',  U'Ξ',  U'\xA0', U'Æ', U'æ',  U'ß',  U'É',
    U' ',  U'!',  U'"',  U'#',  U'¤',  U'%',  U'&',  U'\'', U'(',  U')',  U'*',  U'+',  U',',  U'-',  U'.',  U'/',
    U'0',  U'1',  U'2',  U'3',  U'4',  U'5',  U'6',  U'7',  U'8',  U'9',  U':',  U';',  U'<',  U'=',  U'>',  U'?',
    U'¡',  U'A',  U'B',  U'C',  U'D',  U'E',  U'F',  U'G',  U'H',  U'I',  U'J',  U'K',  U'L',  U'M',  U'N',  U'O',
    U'P',  U'Q',  U'R',  U'S',  U'T',  U'U',  U'V',  U'W',  U'X',  U'Y',  U'Z',  U'Ä',  U'Ö',  U'Ñ',  U'Ü',  U'§',
    U'¿',  U'a',  U'b',  U'c',  U'd',  U'e',  U'f',  U'g',  U'h',  U'i',  U'j',  U'k',  U'l',  U'm',  U'n',  U'o',
    U'p',  U'q',  U'r',  U's',  U't',  U'u',  U'v',  U'w',  U'x',  U'y',  U'z',  U'ä',  U'ö',  U'ñ',  U'ü',  U'à',
};

struct ExtEntry {
  std::uint8_t code;
  char32_t cp;
};

constexpr std::array<ExtEntry, 10> kExtension = {{
    {0x0A, U'\f'}, {0x14, U'^'}, {0x28, U'{'}, {0x29, U'}'}, {0x2F, U'\\'},
    {0x3C, U'['},  {0x3D, U'~'}, {0x3E, U']'}, {0x40, U'|'}, {0x65, U'€'},
}};

// Index 0x1B is the escape slot; never map a code point onto it.
std::optional<std::uint8_t> basic_code(char32_t cp) noexcept {
  for (std::size_t i = 0; i < kBasic.size(); ++i) {
    if (i != kGsm7Escape && kBasic[i] == cp) return static_cast<std::uint8_t>(i);
  }
  return std::nullopt;
}

std::optional<std::uint8_t> ext_code(char32_t cp) noexcept {
  for (const auto& e : kExtension) {
    if (e.cp == cp) return e.code;
  }
  return std::nullopt;
}

}  // namespace

std::optional<int> gsm7_cost(char32_t cp) noexcept {
  if (basic_code(cp)) return 1;
  if (ext_code(cp)) return 2;
  return std::nullopt;
}

std::vector<std::uint8_t> to_gsm7_septets(std::string_view utf8) {
  std::vector<std::uint8_t> out;
  for (char32_t cp : utf8_decode(utf8)) {
    if (auto b = basic_code(cp)) {
      out.push_back(*b);
    } else if (auto e = ext_code(cp)) {
      out.push_back(kGsm7Escape);
      out.push_back(*e);
    } else {
      std::string ch;
      utf8_append(ch, cp);
      fail(Errc::unmappable_character, "character '" + ch + "' is not in the GSM 7-bit alphabet");
    }
  }
  return out;
}

std::string from_gsm7_septets(std::span<const std::uint8_t> septets) {
  std::string out;
  for (std::size_t i = 0; i < septets.size(); ++i) {
    auto s = static_cast<std::uint8_t>(septets[i] & 0x7F);
    if (s == kGsm7Escape) {
      if (i + 1 >= septets.size()) {
        utf8_append(out, U' ');
        continue;
      }
      auto code = static_cast<std::uint8_t>(septets[++i] & 0x7F);
      char32_t cp = kBasic[code];
      for (const auto& e : kExtension) {
        if (e.code == code) cp = e.cp;
      }
      utf8_append(out, cp);
      continue;
    }
    utf8_append(out, kBasic[s]);
  }
  return out;
}

bool is_gsm7(std::string_view utf8) noexcept {
  try {
    for (char32_t cp : utf8_decode(utf8)) {
      if (!gsm7_cost(cp)) return false;
    }
    return true;
  } catch (const Error&) {
    return false;
  }
}

Bytes pack_septets(std::span<const std::uint8_t> septets, std::size_t bit_offset) {
  std::size_t bits = bit_offset + 7 * septets.size();
  Bytes out((bits + 7) / 8, 0);
  std::size_t pos = bit_offset;
  for (auto s : septets) {
    unsigned v = s & 0x7F;
    std::size_t byte = pos / 8, shift = pos % 8;
    out[byte] |= static_cast<std::uint8_t>(v << shift);
    if (shift > 1) out[byte + 1] |= static_cast<std::uint8_t>(v >> (8 - shift));
    pos += 7;
  }
  return out;
}

std::vector<std::uint8_t> unpack_septets(std::span<const std::uint8_t> packed, std::size_t count,
                                         std::size_t bit_offset) {
  if (bit_offset + 7 * count > 8 * packed.size()) fail(Errc::truncated, "not enough octets for septets");
  std::vector<std::uint8_t> out;
  out.reserve(count);
  std::size_t pos = bit_offset;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t byte = pos / 8, shift = pos % 8;
    unsigned v = packed[byte] >> shift;
    if (shift > 1) v |= static_cast<unsigned>(packed[byte + 1]) << (8 - shift);
    out.push_back(static_cast<std::uint8_t>(v & 0x7F));
    pos += 7;
  }
  return out;
}

Gsm7Packed pack_gsm7(std::string_view utf8) {
  auto septets = to_gsm7_septets(utf8);
  return {pack_septets(septets), septets.size()};
}

std::string unpack_gsm7(std::span<const std::uint8_t> packed, std::size_t septets) {
  if (packed.size() != (7 * septets + 7) / 8) {
    fail(Errc::length_mismatch, "packed length does not match septet count");
  }
  return from_gsm7_septets(unpack_septets(packed, septets));
}

}  // namespace cellgate::sms
