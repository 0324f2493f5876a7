#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cellgate/util.hpp"

namespace cellgate::mms {

inline constexpr std::string_view kMmsContentType = "application/vnd.wap.mms-message";
inline constexpr std::string_view kMultipartMixed = "application/vnd.wap.multipart.mixed";
inline constexpr std::string_view kMultipartRelated = "application/vnd.wap.multipart.related";

// Assigned header field numbers (encoded on the wire as 0x80 | field).
namespace field {
inline constexpr std::uint8_t bcc = 0x01;
inline constexpr std::uint8_t cc = 0x02;
inline constexpr std::uint8_t content_location = 0x03;
inline constexpr std::uint8_t content_type = 0x04;
inline constexpr std::uint8_t date = 0x05;
inline constexpr std::uint8_t delivery_report = 0x06;
inline constexpr std::uint8_t expiry = 0x08;
inline constexpr std::uint8_t from = 0x09;
inline constexpr std::uint8_t message_class = 0x0A;
inline constexpr std::uint8_t message_id = 0x0B;
inline constexpr std::uint8_t message_type = 0x0C;
inline constexpr std::uint8_t mms_version = 0x0D;
inline constexpr std::uint8_t message_size = 0x0E;
inline constexpr std::uint8_t report_allowed = 0x11;
inline constexpr std::uint8_t response_status = 0x12;
inline constexpr std::uint8_t response_text = 0x13;
inline constexpr std::uint8_t status = 0x15;
inline constexpr std::uint8_t subject = 0x16;
inline constexpr std::uint8_t to = 0x17;
inline constexpr std::uint8_t transaction_id = 0x18;
}  // namespace field

enum class MessageType : std::uint8_t {
  m_send_req = 0x80,
  m_send_conf = 0x81,
  m_notification_ind = 0x82,
  m_notifyresp_ind = 0x83,
  m_retrieve_conf = 0x84,
  m_acknowledge_ind = 0x85,
  m_delivery_ind = 0x86,
};

inline constexpr MessageType kAllMessageTypes[] = {
    MessageType::m_send_req,      MessageType::m_send_conf,      MessageType::m_notification_ind,
    MessageType::m_notifyresp_ind, MessageType::m_retrieve_conf, MessageType::m_acknowledge_ind,
    MessageType::m_delivery_ind,
};

enum class MessageClass : std::uint8_t { personal = 0x80, advertisement = 0x81, informational = 0x82, automatic = 0x83 };

enum class Status : std::uint8_t {
  expired = 0x80,
  retrieved = 0x81,
  rejected = 0x82,
  deferred = 0x83,
  unrecognised = 0x84,
  indeterminate = 0x85,
  forwarded = 0x86,
  unreachable = 0x87,
};

namespace response_status {
inline constexpr std::uint8_t ok = 0x80;
inline constexpr std::uint8_t error_unspecified = 0x81;
inline constexpr std::uint8_t error_service_denied = 0x82;
inline constexpr std::uint8_t error_message_format_corrupt = 0x83;
inline constexpr std::uint8_t error_sending_address_unresolved = 0x84;
inline constexpr std::uint8_t error_message_not_found = 0x85;
inline constexpr std::uint8_t error_network_problem = 0x86;
inline constexpr std::uint8_t error_content_not_accepted = 0x87;
inline constexpr std::uint8_t error_unsupported_message = 0x88;
}  // namespace response_status

std::string_view to_string(MessageType t) noexcept;
std::string_view to_string(MessageClass c) noexcept;
std::string_view to_string(Status s) noexcept;
std::string response_status_name(std::uint8_t code);
MessageType message_type_from_string(std::string_view s);
MessageClass message_class_from_string(std::string_view s);
Status status_from_string(std::string_view s);

struct Version {
  int major = 1;
  int minor = 2;
  bool operator==(const Version&) const = default;
};

struct Expiry {
  bool relative = true;
  std::uint64_t value = 0;  // seconds: delta when relative, epoch otherwise
  bool operator==(const Expiry&) const = default;
};

struct Headers {
  std::optional<std::string> transaction_id;
  std::optional<std::string> message_id;
  Version version;
  std::optional<std::string> from;  // absent on m_send_req means insert-address token
  std::vector<std::string> to;
  std::vector<std::string> cc;
  std::optional<std::string> subject;
  std::optional<MessageClass> message_class;
  std::optional<Expiry> expiry;
  std::optional<std::string> content_location;
  std::optional<Status> status;
  std::optional<std::uint8_t> response_status;
  std::optional<std::string> response_text;
  std::optional<std::uint64_t> date;
  std::optional<std::uint64_t> message_size;
  std::optional<bool> delivery_report;
  std::optional<bool> report_allowed;
  // Unrecognised header fields kept verbatim: (field number, encoded value).
  std::vector<std::pair<std::uint8_t, Bytes>> unknown;

  bool operator==(const Headers&) const = default;
};

struct Part {
  std::string content_type;
  std::optional<std::string> content_id;
  Bytes data;
  bool operator==(const Part&) const = default;
};

struct Body {
  std::string content_type;  // multipart media type, or the single part's type
  std::vector<Part> parts;   // exactly one part when not multipart
  bool operator==(const Body&) const = default;
};

struct Pdu {
  MessageType type = MessageType::m_send_req;
  Headers headers;
  std::optional<Body> body;
  bool operator==(const Pdu&) const = default;
};

bool is_multipart(std::string_view content_type) noexcept;
bool carries_body(MessageType t) noexcept;

// Throws Error(missing_mandatory_header) naming the first absent field.
void validate(const Pdu& pdu);

// Validates, then encodes. Message type, transaction id and version lead; content type closes.
Bytes encode_pdu(const Pdu& pdu);
// Throws Error(truncated) / Error(unknown_message_type) / Error(decode_failure).
Pdu decode_pdu(std::span<const std::uint8_t> bytes);

// Wire primitives, exposed for tests.
Bytes encode_uintvar(std::uint32_t v);

}  // namespace cellgate::mms
