#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cellgate/util.hpp"

namespace cellgate::sms {

enum class Ton : std::uint8_t { unknown = 0, international = 1, national = 2, alphanumeric = 5 };
enum class Npi : std::uint8_t { unknown = 0, isdn = 1 };
enum class Alphabet { gsm7, ucs2, octet };

std::string_view to_string(Alphabet a) noexcept;
Alphabet alphabet_from_string(std::string_view s);
std::string_view to_string(Ton t) noexcept;

struct Address {
  Ton ton = Ton::unknown;
  Npi npi = Npi::isdn;
  std::string digits;  // no leading '+'; GSM text when alphanumeric

  // "+4917..." -> international/isdn, "0612..." -> unknown/isdn, anything else -> alphanumeric.
  static Address parse(std::string_view text);
  std::string to_string() const;
  // Throws Error(invalid_digit / invalid_argument) on invariant violations.
  void validate() const;

  bool operator==(const Address&) const = default;
};

struct ConcatHeader {
  std::uint16_t ref = 0;  // 8-bit reference unless > 255
  std::uint8_t total = 1;
  std::uint8_t seq = 1;

  bool operator==(const ConcatHeader&) const = default;
};

struct Timestamp {
  int year = 2000;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int tz_quarters = 0;  // signed offset from UTC in quarter hours

  double tz_hours() const noexcept { return tz_quarters / 4.0; }
  std::string to_iso8601() const;
  bool operator==(const Timestamp&) const = default;
};

struct SmsSubmit {
  std::uint8_t message_ref = 0;
  Address destination;
  std::uint8_t pid = 0;
  Alphabet dcs = Alphabet::gsm7;
  std::optional<std::uint8_t> validity_relative;
  std::string user_data;  // UTF-8 text; raw bytes for the octet alphabet
  std::optional<ConcatHeader> udh;

  bool operator==(const SmsSubmit&) const = default;
};

struct SmsDeliver {
  Address originator;
  std::uint8_t pid = 0;
  Alphabet dcs = Alphabet::gsm7;
  Timestamp timestamp;
  std::string user_data;
  std::optional<ConcatHeader> udh;

  bool operator==(const SmsDeliver&) const = default;
};

inline constexpr std::size_t kMaxSeptets = 160;
inline constexpr std::size_t kMaxUserDataOctets = 140;
inline constexpr std::size_t kMaxTpduOctets = 175;
inline constexpr std::size_t kConcatUdhOctets = 6;

Bytes encode_semi_octets(std::string_view digits);
std::string decode_semi_octets(std::span<const std::uint8_t> bytes, std::size_t digit_count);

struct EncodedPdu {
  std::string hex;        // uppercase, SCA length 00 first
  std::size_t tpdu_len = 0;  // octets after the SCA; the AT+CMGS argument
};

EncodedPdu encode_submit(const SmsSubmit& msg);
SmsSubmit decode_submit(std::string_view pdu_hex);
SmsDeliver decode_deliver(std::string_view pdu_hex);

// Dispatches on TP-MTI.
std::variant<SmsSubmit, SmsDeliver> decode_any(std::string_view pdu_hex);

// gsm7 when every character maps, ucs2 otherwise.
Alphabet choose_alphabet(std::string_view text) noexcept;

// Length of `text` in the units the alphabet is limited by: septets, UTF-16 units or octets.
std::size_t user_data_units(std::string_view text, Alphabet alphabet);

struct Segment {
  std::string text;
  std::optional<ConcatHeader> udh;
};

// One segment without UDH when the text fits; otherwise 153-septet / 67-unit / 134-octet
// parts sharing `ref`.
std::vector<Segment> segment(std::string_view text, Alphabet alphabet, std::uint16_t ref = 0);

}  // namespace cellgate::sms
