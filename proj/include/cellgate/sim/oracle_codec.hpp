#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Independent SMS TPDU encoder/decoder used by the modem simulator. It shares
// no code with cellgate::sms so the two can check each other.
namespace cellgate::sim::oracle {

struct Concat {
  int ref = 0;
  int total = 1;
  int seq = 1;
};

struct DeliverSpec {
  std::string originator;     // "+33...", "0612..." or alphanumeric text
  std::string text;           // UTF-8 (raw bytes for "octet")
  std::string alphabet = "gsm7";  // gsm7 | ucs2 | octet
  int pid = 0;
  int year = 2024, month = 1, day = 1, hour = 0, minute = 0, second = 0;
  int tz_quarters = 0;
  std::optional<Concat> concat;
};

std::string encode_deliver(const DeliverSpec& spec);

struct SubmitView {
  int message_ref = 0;
  std::string destination;  // with '+' when international
  int type_of_address = 0;
  std::string alphabet;
  std::string text;
  std::optional<Concat> concat;
  std::optional<int> validity_relative;
  int tpdu_len = 0;
};

// Throws std::runtime_error on malformed input.
SubmitView decode_submit(std::string_view pdu_hex);

// Bit-buffer septet packing: the reference for packed GSM 7-bit vectors.
std::vector<std::uint8_t> pack_text(std::string_view utf8);
bool fits_gsm7(std::string_view utf8);

}  // namespace cellgate::sim::oracle
