#include "cellgate/sim/oracle_codec.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace cellgate::sim::oracle {

namespace {

// The default alphabet in septet order; position 27 is the escape slot.
const char* const kAlphabet =
    "@£$¥èéùìòÇ\nØø\rÅåΔ_ΦΓΛΩΠΨΣΘΞ\x1B"
    "ÆæßÉ !\"#¤%&'()*+,-./0123456789:;<=>?"
    "¡ABCDEFGHIJKLMNOPQRSTUVWXYZÄÖÑÜ§¿abcdefghijklmnopqrstuvwxyzäöñüà";

const char* const kExtChars = "\f^{}\\[~]|€";
const int kExtCodes[] = {10, 20, 40, 41, 47, 60, 61, 62, 64, 101};

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    if (i + n > s.size()) throw std::runtime_error("bad utf-8");
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

struct Tables {
  std::map<std::string, int> basic;
  std::map<int, std::string> basic_rev;
  std::map<std::string, int> ext;
  std::map<int, std::string> ext_rev;

  Tables() {
    auto chars = utf8_chars(kAlphabet);
    if (chars.size() != 128) throw std::logic_error("oracle alphabet must have 128 entries");
    for (int i = 0; i < 128; ++i) {
      basic_rev[i] = chars[i];
      if (i != 27) basic[chars[i]] = i;
    }
    auto ext_chars = utf8_chars(kExtChars);
    for (std::size_t i = 0; i < ext_chars.size(); ++i) {
      ext[ext_chars[i]] = kExtCodes[i];
      ext_rev[kExtCodes[i]] = ext_chars[i];
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

std::vector<int> septets_of(std::string_view text) {
  std::vector<int> out;
  for (const auto& ch : utf8_chars(text)) {
    auto& t = tables();
    if (auto it = t.basic.find(ch); it != t.basic.end()) {
      out.push_back(it->second);
    } else if (auto e = t.ext.find(ch); e != t.ext.end()) {
      out.push_back(27);
      out.push_back(e->second);
    } else {
      throw std::runtime_error("character not in GSM alphabet: " + ch);
    }
  }
  return out;
}

std::string text_of(const std::vector<int>& septets) {
  std::string out;
  auto& t = tables();
  for (std::size_t i = 0; i < septets.size(); ++i) {
    if (septets[i] == 27 && i + 1 < septets.size()) {
      auto e = t.ext_rev.find(septets[++i]);
      out += e != t.ext_rev.end() ? e->second : t.basic_rev.at(septets[i]);
    } else {
      out += septets[i] == 27 ? std::string(" ") : t.basic_rev.at(septets[i]);
    }
  }
  return out;
}

// Bits are appended least-significant first, then read back out as octets.
std::vector<std::uint8_t> bits_to_octets(const std::vector<bool>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return out;
}

void append_bits(std::vector<bool>& bits, unsigned value, int width) {
  for (int b = 0; b < width; ++b) bits.push_back((value >> b) & 1u);
}

std::string hex2(unsigned v) {
  static const char* d = "0123456789ABCDEF";
  return {d[(v >> 4) & 0xF], d[v & 0xF]};
}

std::string hex_of(const std::vector<std::uint8_t>& b) {
  std::string s;
  for (auto x : b) s += hex2(x);
  return s;
}

std::string swap_digits(std::string digits) {
  if (digits.size() % 2) digits += 'F';
  std::string out;
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    out += digits[i + 1];
    out += digits[i];
  }
  for (auto& c : out) {
    if (c == '*') c = 'A';
    if (c == '#') c = 'B';
  }
  return out;
}

std::string bcd_pair(int v) { return swap_digits(std::to_string(v / 10) + std::to_string(v % 10)); }

std::vector<std::uint8_t> utf16be(std::string_view text) {
  std::vector<std::uint8_t> out;
  for (const auto& ch : utf8_chars(text)) {
    auto c0 = static_cast<unsigned char>(ch[0]);
    unsigned cp;
    if (ch.size() == 1) cp = c0;
    else if (ch.size() == 2) cp = ((c0 & 0x1F) << 6) | (ch[1] & 0x3F);
    else if (ch.size() == 3) cp = ((c0 & 0x0F) << 12) | ((ch[1] & 0x3F) << 6) | (ch[2] & 0x3F);
    else cp = ((c0 & 0x07) << 18) | ((ch[1] & 0x3F) << 12) | ((ch[2] & 0x3F) << 6) | (ch[3] & 0x3F);
    auto put = [&](unsigned u) {
      out.push_back(static_cast<std::uint8_t>(u >> 8));
      out.push_back(static_cast<std::uint8_t>(u));
    };
    if (cp > 0xFFFF) {
      cp -= 0x10000;
      put(0xD800 | (cp >> 10));
      put(0xDC00 | (cp & 0x3FF));
    } else {
      put(cp);
    }
  }
  return out;
}

void put_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string from_utf16be(const std::vector<std::uint8_t>& b) {
  std::string out;
  for (std::size_t i = 0; i + 1 < b.size(); i += 2) {
    unsigned u = (b[i] << 8) | b[i + 1];
    if (u >= 0xD800 && u < 0xDC00 && i + 3 < b.size()) {
      unsigned lo = (b[i + 2] << 8) | b[i + 3];
      put_utf8(out, 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00));
      i += 2;
    } else {
      put_utf8(out, u);
    }
  }
  return out;
}

bool all_dial_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || c == '*' || c == '#')) return false;
  }
  return true;
}

std::string address_field(const std::string& addr) {
  if (!addr.empty() && addr[0] == '+') {
    auto digits = addr.substr(1);
    return hex2(static_cast<unsigned>(digits.size())) + "91" + swap_digits(digits);
  }
  if (all_dial_digits(addr)) return hex2(static_cast<unsigned>(addr.size())) + "81" + swap_digits(addr);
  std::vector<bool> bits;
  for (int s : septets_of(addr)) append_bits(bits, static_cast<unsigned>(s), 7);
  auto octets = bits_to_octets(bits);
  auto semis = (bits.size() + 3) / 4;
  return hex2(static_cast<unsigned>(semis)) + "D0" + hex_of(octets);
}

class HexCursor {
 public:
  explicit HexCursor(std::string_view h) : h_(h) {
    if (h.size() % 2) throw std::runtime_error("odd hex length");
  }
  int octet() {
    if (pos_ + 2 > h_.size()) throw std::runtime_error("pdu too short");
    int v = std::stoi(std::string(h_.substr(pos_, 2)), nullptr, 16);
    pos_ += 2;
    return v;
  }
  std::vector<std::uint8_t> octets(std::size_t n) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(octet()));
    return out;
  }
  std::size_t consumed() const { return pos_ / 2; }

 private:
  std::string_view h_;
  std::size_t pos_ = 0;
};

std::vector<int> unpack_bits(const std::vector<std::uint8_t>& octets, std::size_t count) {
  std::vector<bool> bits;
  for (auto o : octets) append_bits(bits, o, 8);
  if (count * 7 > bits.size()) throw std::runtime_error("user data too short");
  std::vector<int> out;
  for (std::size_t i = 0; i < count; ++i) {
    int v = 0;
    for (int b = 0; b < 7; ++b) v |= bits[i * 7 + b] << b;
    out.push_back(v);
  }
  return out;
}

}  // namespace

bool fits_gsm7(std::string_view utf8) {
  try {
    septets_of(utf8);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::uint8_t> pack_text(std::string_view utf8) {
  std::vector<bool> bits;
  for (int s : septets_of(utf8)) append_bits(bits, static_cast<unsigned>(s), 7);
  return bits_to_octets(bits);
}

std::string encode_deliver(const DeliverSpec& spec) {
  std::vector<std::uint8_t> udh;
  if (spec.concat) {
    udh = {0x05, 0x00, 0x03, static_cast<std::uint8_t>(spec.concat->ref), static_cast<std::uint8_t>(spec.concat->total),
           static_cast<std::uint8_t>(spec.concat->seq)};
  }
  std::string pdu = "00";  // no SMSC address
  pdu += hex2(spec.concat ? 0x44 : 0x04);  // SMS-DELIVER, no more messages
  pdu += address_field(spec.originator);
  pdu += hex2(static_cast<unsigned>(spec.pid));
  int tz = spec.tz_quarters < 0 ? -spec.tz_quarters : spec.tz_quarters;
  std::string tz_hex = bcd_pair(tz);
  if (spec.tz_quarters < 0) {
    // sign lives in bit 3 of the first (low-order) semi-octet
    int v = std::stoi(tz_hex, nullptr, 16) | 0x08;
    tz_hex = hex2(static_cast<unsigned>(v));
  }
  std::string scts = bcd_pair(spec.year % 100) + bcd_pair(spec.month) + bcd_pair(spec.day) + bcd_pair(spec.hour) +
                     bcd_pair(spec.minute) + bcd_pair(spec.second) + tz_hex;
  if (spec.alphabet == "gsm7") {
    pdu += "00" + scts;
    std::vector<bool> bits;
    for (auto o : udh) append_bits(bits, o, 8);
    while (bits.size() % 7) bits.push_back(false);
    auto septets = septets_of(spec.text);
    for (int s : septets) append_bits(bits, static_cast<unsigned>(s), 7);
    pdu += hex2(static_cast<unsigned>(bits.size() / 7));
    pdu += hex_of(bits_to_octets(bits));
  } else {
    std::vector<std::uint8_t> body =
        spec.alphabet == "ucs2" ? utf16be(spec.text) : std::vector<std::uint8_t>(spec.text.begin(), spec.text.end());
    pdu += (spec.alphabet == "ucs2" ? "08" : "04") + scts;
    pdu += hex2(static_cast<unsigned>(udh.size() + body.size()));
    pdu += hex_of(udh) + hex_of(body);
  }
  return pdu;
}

SubmitView decode_submit(std::string_view pdu_hex) {
  HexCursor c(pdu_hex);
  int sca = c.octet();
  c.octets(static_cast<std::size_t>(sca));
  std::size_t tpdu_start = c.consumed();
  SubmitView v;
  int fo = c.octet();
  if ((fo & 3) != 1) throw std::runtime_error("not a SUBMIT");
  v.message_ref = c.octet();
  int len = c.octet();
  v.type_of_address = c.octet();
  auto addr = c.octets(static_cast<std::size_t>((len + 1) / 2));
  if ((v.type_of_address & 0x70) == 0x50) {
    v.destination = text_of(unpack_bits(addr, static_cast<std::size_t>(len * 4 / 7)));
  } else {
    std::string digits;
    for (auto o : addr) {
      digits += "0123456789*#abcF"[o & 0xF];
      digits += "0123456789*#abcF"[o >> 4];
    }
    digits.resize(static_cast<std::size_t>(len));
    v.destination = ((v.type_of_address & 0x70) == 0x10 ? "+" : "") + digits;
  }
  c.octet();  // PID
  int dcs = c.octet();
  int vpf = (fo >> 3) & 3;
  if (vpf == 2) v.validity_relative = c.octet();
  if (vpf == 1 || vpf == 3) c.octets(7);
  int udl = c.octet();
  bool has_udh = fo & 0x40;
  int alphabet = (dcs >> 2) & 3;
  auto read_udh = [&](const std::vector<std::uint8_t>& ud) -> std::size_t {
    if (!has_udh) return 0;
    std::size_t udhl = ud.at(0);
    for (std::size_t i = 1; i + 1 < 1 + udhl;) {
      int iei = ud.at(i), iel = ud.at(i + 1);
      if (iei == 0 && iel == 3) v.concat = Concat{ud.at(i + 2), ud.at(i + 3), ud.at(i + 4)};
      if (iei == 8 && iel == 4) v.concat = Concat{(ud.at(i + 2) << 8) | ud.at(i + 3), ud.at(i + 4), ud.at(i + 5)};
      i += 2 + static_cast<std::size_t>(iel);
    }
    return 1 + udhl;
  };
  if (alphabet == 0) {
    v.alphabet = "gsm7";
    auto ud = c.octets(static_cast<std::size_t>((udl * 7 + 7) / 8));
    auto header_octets = read_udh(ud);
    auto skip = (header_octets * 8 + 6) / 7;
    auto septets = unpack_bits(ud, static_cast<std::size_t>(udl));
    v.text = text_of(std::vector<int>(septets.begin() + static_cast<long>(skip), septets.end()));
  } else {
    auto ud = c.octets(static_cast<std::size_t>(udl));
    auto header_octets = read_udh(ud);
    std::vector<std::uint8_t> body(ud.begin() + static_cast<long>(header_octets), ud.end());
    if (alphabet == 2) {
      v.alphabet = "ucs2";
      v.text = from_utf16be(body);
    } else {
      v.alphabet = "octet";
      v.text.assign(body.begin(), body.end());
    }
  }
  v.tpdu_len = static_cast<int>(c.consumed() - tpdu_start);
  return v;
}

}  // namespace cellgate::sim::oracle
