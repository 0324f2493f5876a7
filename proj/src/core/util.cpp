#include "cellgate/util.hpp"

#include <boost/beast/core/detail/base64.hpp>

#include <charconv>
#include <chrono>
#include <ctime>

#include "cellgate/error.hpp"

namespace cellgate {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::timeout: return "timeout";
    case Errc::transport_closed: return "transport-closed";
    case Errc::prompt_never_arrived: return "prompt-never-arrived";
    case Errc::command_failed: return "command-failed";
    case Errc::unmappable_character: return "unmappable-character";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::message_too_long: return "message-too-long";
    case Errc::invalid_digit: return "invalid-digit";
    case Errc::truncated: return "truncated";
    case Errc::bad_hex: return "bad-hex";
    case Errc::unsupported_dcs: return "unsupported-dcs";
    case Errc::missing_mandatory_header: return "missing-mandatory-header";
    case Errc::unknown_message_type: return "unknown-message-type";
    case Errc::http_failure: return "http-failure";
    case Errc::mmsc_status: return "mmsc-status-error";
    case Errc::decode_failure: return "decode-failure";
    case Errc::content_location_gone: return "content-location-gone";
    case Errc::invalid_state: return "invalid-state";
    case Errc::modem_busy: return "modem-busy";
    case Errc::invalid_number: return "invalid-number";
    case Errc::not_ready: return "not-ready";
    case Errc::capability_missing: return "capability-missing";
    case Errc::not_found: return "not-found";
    case Errc::conflict: return "conflict";
    case Errc::unauthorized: return "unauthorized";
    case Errc::sim_pin_required: return "sim-pin-required";
    case Errc::sim_puk: return "sim-puk";
    case Errc::init_failed: return "init-command-failed";
    case Errc::storage_full: return "full-storage";
    case Errc::text_too_long: return "text-too-long";
    case Errc::invalid_index: return "invalid-index";
    case Errc::expired: return "expired";
  }
  return "unknown";
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0F]);
  }
  return out;
}

namespace {
int hex_value(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) fail(Errc::bad_hex, "odd-length hex string");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_value(hex[i]);
    int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::bad_hex, "non-hex character in input");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

std::u32string utf8_decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    char32_t cp;
    int extra;
    if (c < 0x80) {
      cp = c;
      extra = 0;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      extra = 3;
    } else {
      fail(Errc::invalid_argument, "invalid UTF-8 lead byte");
    }
    if (extra > 0 && i + extra >= text.size()) {
      fail(Errc::invalid_argument, "truncated UTF-8 sequence");
    }
    for (int k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) fail(Errc::invalid_argument, "invalid UTF-8 continuation");
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      fail(Errc::invalid_argument, "invalid code point");
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string utf8_encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) utf8_append(out, cp);
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(data.size()), '\0');
  out.resize(b64::encode(out.data(), data.data(), data.size()));
  return out;
}

Bytes base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  // The decoder stops at '=', so padding is checked and stripped here.
  std::size_t pad = 0;
  while (!text.empty() && text.back() == '=' && pad < 3) {
    text.remove_suffix(1);
    ++pad;
  }
  if (pad > 2 || (pad > 0 && (text.size() + pad) % 4 != 0) || text.size() % 4 == 1) {
    fail(Errc::invalid_argument, "invalid base64");
  }
  Bytes out((text.size() + 3) / 4 * 3);
  auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  if (read != text.size()) fail(Errc::invalid_argument, "invalid base64");
  out.resize(written);
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char a = s[i], b = prefix[i];
    if (a >= 'a' && a <= 'z') a = static_cast<char>(a - 32);
    if (b >= 'a' && b <= 'z') b = static_cast<char>(b - 32);
    if (a != b) return false;
  }
  return true;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
  }
  return out;
}

std::vector<std::string> split_at_params(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.emplace_back(quoted ? cur : std::string(trim(cur)));
  return out;
}

std::optional<long long> parse_int(std::string_view s) noexcept {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string iso8601_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace cellgate
