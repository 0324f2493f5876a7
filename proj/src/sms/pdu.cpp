#include "cellgate/sms/pdu.hpp"

#include <cstdio>

#include "cellgate/error.hpp"
#include "cellgate/sms/gsm7.hpp"

namespace cellgate::sms {

std::string_view to_string(Alphabet a) noexcept {
  switch (a) {
    case Alphabet::gsm7: return "gsm7";
    case Alphabet::ucs2: return "ucs2";
    case Alphabet::octet: return "octet";
  }
  return "?";
}

Alphabet alphabet_from_string(std::string_view s) {
  if (s == "gsm7") return Alphabet::gsm7;
  if (s == "ucs2") return Alphabet::ucs2;
  if (s == "octet" || s == "8bit") return Alphabet::octet;
  fail(Errc::invalid_argument, "unknown alphabet " + std::string(s));
}

std::string_view to_string(Ton t) noexcept {
  switch (t) {
    case Ton::unknown: return "unknown";
    case Ton::international: return "international";
    case Ton::national: return "national";
    case Ton::alphanumeric: return "alphanumeric";
  }
  return "?";
}

namespace {

bool is_dial_digit(char c) noexcept { return (c >= '0' && c <= '9') || c == '*' || c == '#'; }

int semi_octet_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c == '*') return 0xA;
  if (c == '#') return 0xB;
  fail(Errc::invalid_digit, std::string("invalid digit '") + c + "'");
}

char semi_octet_char(int v) noexcept {
  if (v < 10) return static_cast<char>('0' + v);
  switch (v) {
    case 0xA: return '*';
    case 0xB: return '#';
    case 0xC: return 'a';
    case 0xD: return 'b';
    case 0xE: return 'c';
    default: return '?';
  }
}

// Bounds-checked cursor; every overrun is a truncated PDU.
class Reader {
 public:
  explicit Reader(const Bytes& b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = std::span<const std::uint8_t>(b_).subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> rest() const { return std::span<const std::uint8_t>(b_).subspan(pos_); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) fail(Errc::truncated, "PDU truncated");
  }
  const Bytes& b_;
  std::size_t pos_ = 0;
};

std::uint8_t type_of_address(const Address& a) noexcept {
  return static_cast<std::uint8_t>(0x80 | (static_cast<unsigned>(a.ton) << 4) | static_cast<unsigned>(a.npi));
}

void encode_address(Bytes& out, const Address& a) {
  a.validate();
  if (a.ton == Ton::alphanumeric) {
    auto septets = to_gsm7_septets(a.digits);
    auto packed = pack_septets(septets);
    out.push_back(static_cast<std::uint8_t>((septets.size() * 7 + 3) / 4));
    out.push_back(type_of_address(a));
    out.insert(out.end(), packed.begin(), packed.end());
    return;
  }
  out.push_back(static_cast<std::uint8_t>(a.digits.size()));
  out.push_back(type_of_address(a));
  auto semi = encode_semi_octets(a.digits);
  out.insert(out.end(), semi.begin(), semi.end());
}

Address decode_address(Reader& r) {
  std::size_t len = r.u8();
  auto toa = r.u8();
  Address a;
  switch ((toa >> 4) & 0x07) {
    case 1: a.ton = Ton::international; break;
    case 2: a.ton = Ton::national; break;
    case 5: a.ton = Ton::alphanumeric; break;
    default: a.ton = Ton::unknown; break;
  }
  a.npi = (toa & 0x0F) == 1 ? Npi::isdn : Npi::unknown;
  auto body = r.take((len + 1) / 2);
  if (a.ton == Ton::alphanumeric) {
    a.digits = from_gsm7_septets(unpack_septets(body, len * 4 / 7));
  } else {
    a.digits = decode_semi_octets(body, len);
  }
  return a;
}

std::uint8_t dcs_octet(Alphabet a) noexcept {
  switch (a) {
    case Alphabet::gsm7: return 0x00;
    case Alphabet::octet: return 0x04;
    case Alphabet::ucs2: return 0x08;
  }
  return 0x00;
}

Alphabet decode_dcs(std::uint8_t dcs) {
  auto group = dcs >> 4;
  if (group <= 0x07) {  // general data coding, with or without auto-deletion
    if (dcs & 0x20) fail(Errc::unsupported_dcs, "compressed text is not supported");
    switch ((dcs >> 2) & 0x03) {
      case 0: return Alphabet::gsm7;
      case 1: return Alphabet::octet;
      case 2: return Alphabet::ucs2;
      default: fail(Errc::unsupported_dcs, "reserved alphabet in DCS");
    }
  }
  if (group == 0x0C || group == 0x0D) return Alphabet::gsm7;
  if (group == 0x0E) return Alphabet::ucs2;
  if (group == 0x0F) return (dcs & 0x04) ? Alphabet::octet : Alphabet::gsm7;
  fail(Errc::unsupported_dcs, "unsupported DCS group");
}

Bytes ucs2_encode(std::string_view utf8) {
  Bytes out;
  auto push = [&](unsigned u) {
    out.push_back(static_cast<std::uint8_t>(u >> 8));
    out.push_back(static_cast<std::uint8_t>(u & 0xFF));
  };
  for (char32_t cp : utf8_decode(utf8)) {
    if (cp >= 0x10000) {
      cp -= 0x10000;
      push(0xD800 + (cp >> 10));
      push(0xDC00 + (cp & 0x3FF));
    } else {
      push(cp);
    }
  }
  return out;
}

std::string ucs2_decode(std::span<const std::uint8_t> data) {
  std::string out;
  std::size_t n = data.size() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    unsigned u = static_cast<unsigned>(data[2 * i]) << 8 | data[2 * i + 1];
    if (u >= 0xD800 && u <= 0xDBFF && i + 1 < n) {
      unsigned lo = static_cast<unsigned>(data[2 * i + 2]) << 8 | data[2 * i + 3];
      if (lo >= 0xDC00 && lo <= 0xDFFF) {
        utf8_append(out, 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00));
        ++i;
        continue;
      }
    }
    if (u >= 0xD800 && u <= 0xDFFF) u = 0xFFFD;
    utf8_append(out, u);
  }
  return out;
}

Bytes concat_udh(const ConcatHeader& h) {
  if (h.ref > 0xFF) {
    return {0x06, 0x08, 0x04, static_cast<std::uint8_t>(h.ref >> 8), static_cast<std::uint8_t>(h.ref & 0xFF),
            h.total, h.seq};
  }
  return {0x05, 0x00, 0x03, static_cast<std::uint8_t>(h.ref), h.total, h.seq};
}

std::optional<ConcatHeader> parse_udh(std::span<const std::uint8_t> udh) {
  std::optional<ConcatHeader> found;
  std::size_t i = 0;
  while (i + 2 <= udh.size()) {
    auto iei = udh[i];
    std::size_t len = udh[i + 1];
    if (i + 2 + len > udh.size()) break;
    auto ie = udh.subspan(i + 2, len);
    if (iei == 0x00 && len == 3) {
      found = ConcatHeader{ie[0], ie[1], ie[2]};
    } else if (iei == 0x08 && len == 4) {
      found = ConcatHeader{static_cast<std::uint16_t>(ie[0] << 8 | ie[1]), ie[2], ie[3]};
    }
    i += 2 + len;
  }
  return found;
}

// Appends UDL + UD for the given alphabet.
void encode_user_data(Bytes& out, std::string_view text, Alphabet alphabet,
                      const std::optional<ConcatHeader>& udh) {
  Bytes header = udh ? concat_udh(*udh) : Bytes{};
  if (alphabet == Alphabet::gsm7) {
    auto septets = to_gsm7_septets(text);
    std::size_t header_bits = header.size() * 8;
    std::size_t header_septets = (header_bits + 6) / 7;
    std::size_t udl = header_septets + septets.size();
    if (udl > kMaxSeptets) fail(Errc::message_too_long, "user data exceeds 160 septets");
    auto ud = pack_septets(septets, header_septets * 7);
    std::copy(header.begin(), header.end(), ud.begin());
    out.push_back(static_cast<std::uint8_t>(udl));
    out.insert(out.end(), ud.begin(), ud.end());
    return;
  }
  Bytes body = alphabet == Alphabet::ucs2 ? ucs2_encode(text) : Bytes(text.begin(), text.end());
  std::size_t udl = header.size() + body.size();
  if (udl > kMaxUserDataOctets) fail(Errc::message_too_long, "user data exceeds 140 octets");
  out.push_back(static_cast<std::uint8_t>(udl));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), body.begin(), body.end());
}

struct UserData {
  std::string text;
  std::optional<ConcatHeader> udh;
};

UserData decode_user_data(Reader& r, Alphabet alphabet, bool has_udh) {
  std::size_t udl = r.u8();
  UserData result;
  if (alphabet == Alphabet::gsm7) {
    if (udl > kMaxSeptets) fail(Errc::decode_failure, "UDL exceeds 160 septets");
    auto ud = r.take((udl * 7 + 7) / 8);
    std::size_t skip = 0;
    if (has_udh) {
      if (ud.empty()) fail(Errc::truncated, "missing UDH");
      std::size_t udhl = ud[0];
      if (1 + udhl > ud.size()) fail(Errc::truncated, "UDH longer than user data");
      result.udh = parse_udh(ud.subspan(1, udhl));
      skip = ((1 + udhl) * 8 + 6) / 7;
      if (skip > udl) fail(Errc::decode_failure, "UDH longer than UDL");
    }
    auto septets = unpack_septets(ud, udl);
    result.text = from_gsm7_septets(std::span(septets).subspan(skip));
    return result;
  }
  if (udl > kMaxUserDataOctets) fail(Errc::decode_failure, "UDL exceeds 140 octets");
  auto ud = r.take(udl);
  if (has_udh) {
    if (ud.empty()) fail(Errc::truncated, "missing UDH");
    std::size_t udhl = ud[0];
    if (1 + udhl > ud.size()) fail(Errc::truncated, "UDH longer than user data");
    result.udh = parse_udh(ud.subspan(1, udhl));
    ud = ud.subspan(1 + udhl);
  }
  if (alphabet == Alphabet::ucs2) {
    result.text = ucs2_decode(ud);
  } else {
    result.text.assign(ud.begin(), ud.end());
  }
  return result;
}

int swapped_bcd(std::uint8_t b) noexcept { return (b & 0x0F) * 10 + (b >> 4); }

Timestamp decode_timestamp(Reader& r) {
  auto raw = r.take(7);
  Timestamp t;
  t.year = 2000 + swapped_bcd(raw[0]);
  t.month = swapped_bcd(raw[1]);
  t.day = swapped_bcd(raw[2]);
  t.hour = swapped_bcd(raw[3]);
  t.minute = swapped_bcd(raw[4]);
  t.second = swapped_bcd(raw[5]);
  // The first semi-octet (low nibble) carries the sign in its bit 3.
  std::uint8_t tz = raw[6];
  int quarters = (tz & 0x07) * 10 + (tz >> 4);
  t.tz_quarters = (tz & 0x08) ? -quarters : quarters;
  return t;
}

std::size_t skip_sca(Reader& r) {
  std::size_t len = r.u8();
  r.take(len);
  return len;
}

}  // namespace

std::string Timestamp::to_iso8601() const {
  int off = tz_quarters * 15;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d%c%02d:%02d", year, month, day, hour, minute, second,
                off < 0 ? '-' : '+', std::abs(off) / 60, std::abs(off) % 60);
  return buf;
}

Address Address::parse(std::string_view text) {
  Address a;
  if (!text.empty() && text.front() == '+') {
    a.ton = Ton::international;
    a.npi = Npi::isdn;
    a.digits = std::string(text.substr(1));
  } else if (!text.empty() && std::all_of(text.begin(), text.end(), is_dial_digit)) {
    a.ton = Ton::unknown;
    a.npi = Npi::isdn;
    a.digits = std::string(text);
  } else {
    a.ton = Ton::alphanumeric;
    a.npi = Npi::unknown;
    a.digits = std::string(text);
  }
  a.validate();
  return a;
}

std::string Address::to_string() const {
  return ton == Ton::international ? "+" + digits : digits;
}

void Address::validate() const {
  if (ton == Ton::alphanumeric) {
    if (digits.empty()) fail(Errc::invalid_argument, "alphanumeric address is empty");
    auto septets = to_gsm7_septets(digits);
    if (utf8_decode(digits).size() > 11 || septets.size() > 11) {
      fail(Errc::invalid_argument, "alphanumeric address longer than 11 characters");
    }
    return;
  }
  if (digits.size() > 20) fail(Errc::invalid_argument, "address longer than 20 digits");
  for (char c : digits) {
    if (!is_dial_digit(c)) fail(Errc::invalid_digit, std::string("invalid address digit '") + c + "'");
  }
}

Bytes encode_semi_octets(std::string_view digits) {
  Bytes out;
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    int lo = semi_octet_value(digits[i]);
    int hi = i + 1 < digits.size() ? semi_octet_value(digits[i + 1]) : 0xF;
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

std::string decode_semi_octets(std::span<const std::uint8_t> bytes, std::size_t digit_count) {
  std::string out;
  for (std::size_t i = 0; i < digit_count; ++i) {
    if (i / 2 >= bytes.size()) fail(Errc::truncated, "semi-octet field truncated");
    auto b = bytes[i / 2];
    int v = (i % 2 == 0) ? (b & 0x0F) : (b >> 4);
    if (v == 0xF) break;
    out.push_back(semi_octet_char(v));
  }
  return out;
}

EncodedPdu encode_submit(const SmsSubmit& msg) {
  if (msg.udh && (msg.udh->total == 0 || msg.udh->seq == 0 || msg.udh->seq > msg.udh->total)) {
    fail(Errc::invalid_argument, "concatenation header seq must be within 1..total");
  }
  Bytes tpdu;
  std::uint8_t first = 0x01;  // SMS-SUBMIT
  if (msg.validity_relative) first |= 0x10;
  if (msg.udh) first |= 0x40;
  tpdu.push_back(first);
  tpdu.push_back(msg.message_ref);
  encode_address(tpdu, msg.destination);
  tpdu.push_back(msg.pid);
  tpdu.push_back(dcs_octet(msg.dcs));
  if (msg.validity_relative) tpdu.push_back(*msg.validity_relative);
  encode_user_data(tpdu, msg.user_data, msg.dcs, msg.udh);
  if (tpdu.size() > kMaxTpduOctets) fail(Errc::message_too_long, "TPDU exceeds 175 octets");
  EncodedPdu out;
  out.tpdu_len = tpdu.size();
  out.hex = "00" + to_hex(tpdu);
  return out;
}

SmsSubmit decode_submit(std::string_view pdu_hex) {
  auto bytes = from_hex(pdu_hex);
  Reader r(bytes);
  skip_sca(r);
  auto first = r.u8();
  if ((first & 0x03) != 0x01) fail(Errc::decode_failure, "not an SMS-SUBMIT");
  SmsSubmit m;
  m.message_ref = r.u8();
  m.destination = decode_address(r);
  m.pid = r.u8();
  m.dcs = decode_dcs(r.u8());
  switch ((first >> 3) & 0x03) {
    case 0x02: m.validity_relative = r.u8(); break;
    case 0x01:
    case 0x03: r.take(7); break;
    default: break;
  }
  auto ud = decode_user_data(r, m.dcs, first & 0x40);
  m.user_data = std::move(ud.text);
  m.udh = ud.udh;
  return m;
}

SmsDeliver decode_deliver(std::string_view pdu_hex) {
  auto bytes = from_hex(pdu_hex);
  Reader r(bytes);
  skip_sca(r);
  auto first = r.u8();
  if ((first & 0x03) != 0x00) fail(Errc::decode_failure, "not an SMS-DELIVER");
  SmsDeliver m;
  m.originator = decode_address(r);
  m.pid = r.u8();
  m.dcs = decode_dcs(r.u8());
  m.timestamp = decode_timestamp(r);
  auto ud = decode_user_data(r, m.dcs, first & 0x40);
  m.user_data = std::move(ud.text);
  m.udh = ud.udh;
  return m;
}

std::variant<SmsSubmit, SmsDeliver> decode_any(std::string_view pdu_hex) {
  auto bytes = from_hex(pdu_hex);
  Reader r(bytes);
  skip_sca(r);
  auto mti = r.u8() & 0x03;
  if (mti == 0x01) return decode_submit(pdu_hex);
  if (mti == 0x00) return decode_deliver(pdu_hex);
  fail(Errc::decode_failure, "unsupported TP-MTI " + std::to_string(mti));
}

Alphabet choose_alphabet(std::string_view text) noexcept {
  return is_gsm7(text) ? Alphabet::gsm7 : Alphabet::ucs2;
}

std::size_t user_data_units(std::string_view text, Alphabet alphabet) {
  switch (alphabet) {
    case Alphabet::gsm7: return to_gsm7_septets(text).size();
    case Alphabet::ucs2: return ucs2_encode(text).size() / 2;
    case Alphabet::octet: return text.size();
  }
  return 0;
}

std::vector<Segment> segment(std::string_view text, Alphabet alphabet, std::uint16_t ref) {
  std::size_t single = 0, multi = 0;
  switch (alphabet) {
    case Alphabet::gsm7: single = kMaxSeptets, multi = kMaxSeptets - 7; break;
    case Alphabet::ucs2: single = kMaxUserDataOctets / 2, multi = (kMaxUserDataOctets - kConcatUdhOctets) / 2; break;
    case Alphabet::octet: single = kMaxUserDataOctets, multi = kMaxUserDataOctets - kConcatUdhOctets; break;
  }
  if (user_data_units(text, alphabet) <= single) return {Segment{std::string(text), std::nullopt}};

  std::vector<std::string> parts;
  std::string cur;
  std::size_t used = 0;
  auto flush = [&] {
    parts.push_back(std::move(cur));
    cur.clear();
    used = 0;
  };
  if (alphabet == Alphabet::octet) {
    for (char c : text) {
      if (used + 1 > multi) flush();
      cur.push_back(c);
      ++used;
    }
  } else {
    for (char32_t cp : utf8_decode(text)) {
      std::size_t cost = alphabet == Alphabet::gsm7 ? static_cast<std::size_t>(gsm7_cost(cp).value_or(1))
                                                    : (cp >= 0x10000 ? 2 : 1);
      if (used + cost > multi) flush();
      utf8_append(cur, cp);
      used += cost;
    }
  }
  if (!cur.empty()) flush();
  if (parts.size() > 255) fail(Errc::message_too_long, "text needs more than 255 segments");

  std::vector<Segment> out;
  auto total = static_cast<std::uint8_t>(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.push_back(Segment{std::move(parts[i]), ConcatHeader{ref, total, static_cast<std::uint8_t>(i + 1)}});
  }
  return out;
}

}  // namespace cellgate::sms
