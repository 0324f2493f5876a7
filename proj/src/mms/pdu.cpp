#include "cellgate/mms/pdu.hpp"

#include <array>

#include "cellgate/error.hpp"

namespace cellgate::mms {

namespace {

constexpr std::uint8_t kCharsetUtf8 = 106;
constexpr std::uint8_t kQuote = 0x7F;
constexpr std::uint8_t kAddressPresent = 0x80;
constexpr std::uint8_t kInsertAddress = 0x81;
constexpr std::uint8_t kAbsoluteToken = 0x80;
constexpr std::uint8_t kRelativeToken = 0x81;
constexpr std::uint8_t kYes = 0x80;
constexpr std::uint8_t kNo = 0x81;
constexpr std::uint8_t kPartContentId = 0x40;

struct WellKnownMedia {
  std::uint8_t code;
  std::string_view name;
};

constexpr std::array<WellKnownMedia, 14> kMedia = {{
    {0x00, "*/*"},
    {0x01, "text/*"},
    {0x02, "text/html"},
    {0x03, "text/plain"},
    {0x0C, "multipart/mixed"},
    {0x1D, "image/gif"},
    {0x1E, "image/jpeg"},
    {0x20, "image/png"},
    {0x22, "application/vnd.wap.multipart.*"},
    {0x23, "application/vnd.wap.multipart.mixed"},
    {0x26, "application/vnd.wap.multipart.alternative"},
    {0x27, "application/xml"},
    {0x28, "text/xml"},
    {0x33, "application/vnd.wap.multipart.related"},
}};

// ---- encoding ----

class Writer {
 public:
  Bytes out;

  void octet(std::uint8_t b) { out.push_back(b); }
  void bytes(std::span<const std::uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }
  void field(std::uint8_t f) { octet(static_cast<std::uint8_t>(0x80 | f)); }

  void short_int(std::uint8_t v) { octet(static_cast<std::uint8_t>(0x80 | v)); }

  static Bytes long_int_bytes(std::uint64_t v) {
    Bytes be;
    do {
      be.insert(be.begin(), static_cast<std::uint8_t>(v & 0xFF));
      v >>= 8;
    } while (v != 0);
    Bytes out{static_cast<std::uint8_t>(be.size())};
    out.insert(out.end(), be.begin(), be.end());
    return out;
  }
  void long_int(std::uint64_t v) { bytes(long_int_bytes(v)); }

  void value_length(std::size_t len) {
    if (len < 31) {
      octet(static_cast<std::uint8_t>(len));
    } else {
      octet(31);
      bytes(encode_uintvar(static_cast<std::uint32_t>(len)));
    }
  }

  void text(std::string_view s) {
    if (!s.empty() && static_cast<std::uint8_t>(s.front()) >= 0x80) octet(kQuote);
    out.insert(out.end(), s.begin(), s.end());
    octet(0);
  }

  static bool ascii(std::string_view s) {
    for (char c : s) {
      if (static_cast<std::uint8_t>(c) >= 0x80) return false;
    }
    return true;
  }

  // Plain text-string for ASCII, charset-tagged UTF-8 otherwise.
  void encoded_string(std::string_view s) {
    if (ascii(s)) {
      text(s);
      return;
    }
    Writer inner;
    inner.short_int(kCharsetUtf8);
    inner.text(s);
    value_length(inner.out.size());
    bytes(inner.out);
  }

  void media(std::string_view type) {
    for (const auto& m : kMedia) {
      if (m.name == type) {
        short_int(m.code);
        return;
      }
    }
    text(type);
  }
};

void require_text(std::string_view what, std::string_view s) {
  if (s.find('\0') != std::string_view::npos) fail(Errc::invalid_argument, std::string(what) + " contains NUL");
}

Bytes encode_body(const Body& body) {
  Writer w;
  if (!is_multipart(body.content_type)) {
    if (body.parts.size() != 1) fail(Errc::invalid_argument, "single-part body needs exactly one part");
    w.bytes(body.parts.front().data);
    return w.out;
  }
  w.bytes(encode_uintvar(static_cast<std::uint32_t>(body.parts.size())));
  for (const auto& p : body.parts) {
    Writer h;
    h.media(p.content_type);
    if (p.content_id) {
      require_text("content id", *p.content_id);
      h.octet(0x80 | kPartContentId);
      h.octet('"');
      h.out.insert(h.out.end(), p.content_id->begin(), p.content_id->end());
      h.octet(0);
    }
    w.bytes(encode_uintvar(static_cast<std::uint32_t>(h.out.size())));
    w.bytes(encode_uintvar(static_cast<std::uint32_t>(p.data.size())));
    w.bytes(h.out);
    w.bytes(p.data);
  }
  return w.out;
}

// ---- decoding ----

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : b_(b) {}

  bool done() const noexcept { return pos_ >= b_.size(); }
  std::uint8_t peek() const {
    need(1);
    return b_[pos_];
  }
  std::uint8_t octet() {
    need(1);
    return b_[pos_++];
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> rest() {
    auto s = b_.subspan(pos_);
    pos_ = b_.size();
    return s;
  }
  std::size_t pos() const noexcept { return pos_; }

  std::uint32_t uintvar() {
    std::uint32_t v = 0;
    for (int i = 0; i < 5; ++i) {
      auto b = octet();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    fail(Errc::decode_failure, "uintvar longer than 5 octets");
  }

  std::size_t value_length() {
    auto b = octet();
    if (b < 31) return b;
    if (b == 31) return uintvar();
    fail(Errc::decode_failure, "expected a value length");
  }

  std::uint64_t long_int() {
    auto n = octet();
    if (n == 0 || n > 8) fail(Errc::decode_failure, "bad long-integer length");
    std::uint64_t v = 0;
    for (auto b : take(n)) v = (v << 8) | b;
    return v;
  }

  std::uint64_t integer() {
    if (peek() & 0x80) return octet() & 0x7F;
    return long_int();
  }

  std::string text() {
    if (peek() == kQuote) octet();
    std::string s;
    for (;;) {
      auto b = octet();
      if (b == 0) return s;
      s.push_back(static_cast<char>(b));
    }
  }

  std::string encoded_string() {
    auto b = peek();
    if (b > 31) return text();
    auto len = value_length();
    Cursor inner(take(len));
    if (inner.done()) return {};
    inner.integer();  // charset; only UTF-8/ASCII are produced, others pass through
    return inner.text();
  }

  // Skips one generic header value and returns its encoded bytes.
  Bytes opaque_value() {
    auto start = pos_;
    auto b = peek();
    if (b < 31) {
      auto len = octet();
      take(len);
    } else if (b == 31) {
      octet();
      take(uintvar());
    } else if (b < 128) {
      text();
    } else {
      octet();
    }
    auto s = b_.subspan(start, pos_ - start);
    return Bytes(s.begin(), s.end());
  }

  std::string media() {
    auto b = peek();
    if (b & 0x80) return media_name(octet() & 0x7F);
    if (b > 31) return text();
    // Content-general-form: value length, media, parameters (dropped).
    auto len = value_length();
    Cursor inner(take(len));
    if (inner.done()) fail(Errc::decode_failure, "empty content type");
    auto m = inner.peek();
    if (m & 0x80) return media_name(inner.octet() & 0x7F);
    if (m <= 31) return media_name(static_cast<std::uint8_t>(inner.long_int()));
    return inner.text();
  }

  static std::string media_name(std::uint8_t code) {
    for (const auto& m : kMedia) {
      if (m.code == code) return std::string(m.name);
    }
    return "application/x-wsp-" + std::to_string(code);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) fail(Errc::truncated, "MMS PDU truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

Body decode_body(std::string content_type, std::span<const std::uint8_t> data) {
  Body body;
  body.content_type = std::move(content_type);
  if (!is_multipart(body.content_type)) {
    body.parts.push_back(Part{body.content_type, std::nullopt, Bytes(data.begin(), data.end())});
    return body;
  }
  Cursor c(data);
  if (c.done()) return body;
  auto count = c.uintvar();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto headers_len = c.uintvar();
    auto data_len = c.uintvar();
    Cursor h(c.take(headers_len));
    Part p;
    p.content_type = h.media();
    while (!h.done()) {
      auto f = h.octet();
      if (f == (0x80 | kPartContentId)) {
        if (!h.done() && h.peek() == '"') h.octet();
        p.content_id = h.text();
      } else if (f & 0x80) {
        h.opaque_value();
      } else {
        // application header: the octet read starts the token text
        while (h.octet() != 0) {
        }
        h.text();
      }
    }
    auto payload = c.take(data_len);
    p.data.assign(payload.begin(), payload.end());
    body.parts.push_back(std::move(p));
  }
  return body;
}

}  // namespace

Bytes encode_uintvar(std::uint32_t v) {
  Bytes out{static_cast<std::uint8_t>(v & 0x7F)};
  v >>= 7;
  while (v != 0) {
    out.insert(out.begin(), static_cast<std::uint8_t>(0x80 | (v & 0x7F)));
    v >>= 7;
  }
  return out;
}

std::string_view to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::m_send_req: return "m-send-req";
    case MessageType::m_send_conf: return "m-send-conf";
    case MessageType::m_notification_ind: return "m-notification-ind";
    case MessageType::m_notifyresp_ind: return "m-notifyresp-ind";
    case MessageType::m_retrieve_conf: return "m-retrieve-conf";
    case MessageType::m_acknowledge_ind: return "m-acknowledge-ind";
    case MessageType::m_delivery_ind: return "m-delivery-ind";
  }
  return "?";
}

MessageType message_type_from_string(std::string_view s) {
  for (auto t : kAllMessageTypes) {
    if (to_string(t) == s) return t;
  }
  fail(Errc::unknown_message_type, "unknown message type " + std::string(s));
}

std::string_view to_string(MessageClass c) noexcept {
  switch (c) {
    case MessageClass::personal: return "personal";
    case MessageClass::advertisement: return "advertisement";
    case MessageClass::informational: return "informational";
    case MessageClass::automatic: return "auto";
  }
  return "?";
}

MessageClass message_class_from_string(std::string_view s) {
  for (auto c : {MessageClass::personal, MessageClass::advertisement, MessageClass::informational,
                 MessageClass::automatic}) {
    if (to_string(c) == s) return c;
  }
  fail(Errc::invalid_argument, "unknown message class " + std::string(s));
}

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::expired: return "expired";
    case Status::retrieved: return "retrieved";
    case Status::rejected: return "rejected";
    case Status::deferred: return "deferred";
    case Status::unrecognised: return "unrecognised";
    case Status::indeterminate: return "indeterminate";
    case Status::forwarded: return "forwarded";
    case Status::unreachable: return "unreachable";
  }
  return "?";
}

Status status_from_string(std::string_view s) {
  for (std::uint8_t v = 0x80; v <= 0x87; ++v) {
    if (to_string(static_cast<Status>(v)) == s) return static_cast<Status>(v);
  }
  fail(Errc::invalid_argument, "unknown status " + std::string(s));
}

std::string response_status_name(std::uint8_t code) {
  static constexpr std::array<std::string_view, 9> kNames = {
      "ok",
      "error-unspecified",
      "error-service-denied",
      "error-message-format-corrupt",
      "error-sending-address-unresolved",
      "error-message-not-found",
      "error-network-problem",
      "error-content-not-accepted",
      "error-unsupported-message",
  };
  if (code >= 0x80 && code < 0x80 + kNames.size()) return std::string(kNames[code - 0x80]);
  if (code >= 0xC0 && code < 0xE0) return "error-transient-" + std::to_string(code);
  return "error-permanent-" + std::to_string(code);
}

bool is_multipart(std::string_view content_type) noexcept {
  return content_type.starts_with("application/vnd.wap.multipart.") || content_type.starts_with("multipart/");
}

bool carries_body(MessageType t) noexcept {
  return t == MessageType::m_send_req || t == MessageType::m_retrieve_conf;
}

void validate(const Pdu& pdu) {
  const auto& h = pdu.headers;
  auto missing = [](std::string_view name) {
    fail(Errc::missing_mandatory_header, "missing mandatory header " + std::string(name));
  };
  auto need_tid = [&] {
    if (!h.transaction_id || h.transaction_id->empty()) missing("X-Mms-Transaction-ID");
  };
  switch (pdu.type) {
    case MessageType::m_send_req:
      need_tid();
      if (h.to.empty() && h.cc.empty()) missing("To");
      if (!pdu.body) missing("Content-Type");
      break;
    case MessageType::m_send_conf:
      need_tid();
      if (!h.response_status) missing("X-Mms-Response-Status");
      break;
    case MessageType::m_notification_ind:
      need_tid();
      if (!h.content_location) missing("X-Mms-Content-Location");
      if (!h.expiry) missing("X-Mms-Expiry");
      if (!h.message_size) missing("X-Mms-Message-Size");
      break;
    case MessageType::m_notifyresp_ind:
      need_tid();
      if (!h.status) missing("X-Mms-Status");
      break;
    case MessageType::m_retrieve_conf:
      if (!h.date) missing("Date");
      if (!pdu.body) missing("Content-Type");
      break;
    case MessageType::m_acknowledge_ind:
      need_tid();
      break;
    case MessageType::m_delivery_ind:
      if (!h.message_id) missing("Message-ID");
      if (h.to.empty()) missing("To");
      if (!h.date) missing("Date");
      if (!h.status) missing("X-Mms-Status");
      break;
  }
  if (pdu.body && !carries_body(pdu.type)) {
    fail(Errc::invalid_argument, std::string(to_string(pdu.type)) + " carries no body");
  }
}

Bytes encode_pdu(const Pdu& pdu) {
  validate(pdu);
  const auto& h = pdu.headers;
  Writer w;
  w.field(field::message_type);
  w.octet(static_cast<std::uint8_t>(pdu.type));
  if (h.transaction_id) {
    require_text("transaction id", *h.transaction_id);
    w.field(field::transaction_id);
    w.text(*h.transaction_id);
  }
  w.field(field::mms_version);
  w.short_int(static_cast<std::uint8_t>((h.version.major & 0x07) << 4 | (h.version.minor & 0x0F)));
  if (h.date) {
    w.field(field::date);
    w.long_int(*h.date);
  }
  if (h.from || pdu.type == MessageType::m_send_req) {
    Writer v;
    if (h.from) {
      require_text("from", *h.from);
      v.octet(kAddressPresent);
      v.encoded_string(*h.from);
    } else {
      v.octet(kInsertAddress);
    }
    w.field(field::from);
    w.value_length(v.out.size());
    w.bytes(v.out);
  }
  for (const auto& to : h.to) {
    require_text("to", to);
    w.field(field::to);
    w.encoded_string(to);
  }
  for (const auto& cc : h.cc) {
    require_text("cc", cc);
    w.field(field::cc);
    w.encoded_string(cc);
  }
  if (h.subject) {
    require_text("subject", *h.subject);
    w.field(field::subject);
    w.encoded_string(*h.subject);
  }
  if (h.message_class) {
    w.field(field::message_class);
    w.octet(static_cast<std::uint8_t>(*h.message_class));
  }
  if (h.expiry) {
    Writer v;
    v.octet(h.expiry->relative ? kRelativeToken : kAbsoluteToken);
    v.long_int(h.expiry->value);
    w.field(field::expiry);
    w.value_length(v.out.size());
    w.bytes(v.out);
  }
  if (h.delivery_report) {
    w.field(field::delivery_report);
    w.octet(*h.delivery_report ? kYes : kNo);
  }
  if (h.message_size) {
    w.field(field::message_size);
    w.long_int(*h.message_size);
  }
  if (h.content_location) {
    require_text("content location", *h.content_location);
    w.field(field::content_location);
    w.text(*h.content_location);
  }
  if (h.message_id) {
    require_text("message id", *h.message_id);
    w.field(field::message_id);
    w.text(*h.message_id);
  }
  if (h.status) {
    w.field(field::status);
    w.octet(static_cast<std::uint8_t>(*h.status));
  }
  if (h.response_status) {
    w.field(field::response_status);
    w.octet(*h.response_status);
  }
  if (h.response_text) {
    require_text("response text", *h.response_text);
    w.field(field::response_text);
    w.encoded_string(*h.response_text);
  }
  if (h.report_allowed) {
    w.field(field::report_allowed);
    w.octet(*h.report_allowed ? kYes : kNo);
  }
  for (const auto& [f, value] : h.unknown) {
    w.field(f);
    w.bytes(value);
  }
  if (pdu.body) {
    w.field(field::content_type);
    w.media(pdu.body->content_type);
    w.bytes(encode_body(*pdu.body));
  }
  return w.out;
}

Pdu decode_pdu(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  if (c.done()) fail(Errc::truncated, "empty MMS PDU");
  if (c.octet() != (0x80 | field::message_type)) fail(Errc::unknown_message_type, "PDU does not start with X-Mms-Message-Type");
  auto type = c.octet();
  if (type < 0x80 || type > 0x86) fail(Errc::unknown_message_type, "unknown message type " + std::to_string(type));
  Pdu pdu;
  pdu.type = static_cast<MessageType>(type);
  auto& h = pdu.headers;
  while (!c.done()) {
    auto f = c.octet();
    if (!(f & 0x80)) fail(Errc::decode_failure, "application headers are not supported");
    auto id = static_cast<std::uint8_t>(f & 0x7F);
    switch (id) {
      case field::transaction_id: h.transaction_id = c.text(); break;
      case field::mms_version: {
        auto v = c.octet() & 0x7F;
        h.version = Version{(v >> 4) & 0x07, v & 0x0F};
        break;
      }
      case field::date: h.date = c.long_int(); break;
      case field::from: {
        Cursor v(c.take(c.value_length()));
        if (v.octet() == kAddressPresent) h.from = v.encoded_string();
        break;
      }
      case field::to: h.to.push_back(c.encoded_string()); break;
      case field::cc: h.cc.push_back(c.encoded_string()); break;
      case field::subject: h.subject = c.encoded_string(); break;
      case field::message_class: {
        auto b = c.peek();
        if (b >= 0x80 && b <= 0x83) {
          h.message_class = static_cast<MessageClass>(c.octet());
        } else {
          h.unknown.emplace_back(id, c.opaque_value());
        }
        break;
      }
      case field::expiry: {
        Cursor v(c.take(c.value_length()));
        Expiry e;
        e.relative = v.octet() == kRelativeToken;
        e.value = v.long_int();
        h.expiry = e;
        break;
      }
      case field::delivery_report: h.delivery_report = c.octet() == kYes; break;
      case field::report_allowed: h.report_allowed = c.octet() == kYes; break;
      case field::message_size: h.message_size = c.long_int(); break;
      case field::content_location: h.content_location = c.text(); break;
      case field::message_id: h.message_id = c.text(); break;
      case field::status: h.status = static_cast<Status>(c.octet()); break;
      case field::response_status: h.response_status = c.octet(); break;
      case field::response_text: h.response_text = c.encoded_string(); break;
      case field::content_type: {
        auto media = c.media();
        pdu.body = decode_body(std::move(media), c.rest());
        break;
      }
      default: h.unknown.emplace_back(id, c.opaque_value()); break;
    }
  }
  return pdu;
}

}  // namespace cellgate::mms
