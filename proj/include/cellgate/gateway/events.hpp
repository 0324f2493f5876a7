#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cellgate::gateway {

enum class EventKind {
  incoming_call,
  call_state,
  sms_received,
  mms_notification,
  mms_delivery,
  modem_status,
  service_alert,
};

std::string_view to_string(EventKind k) noexcept;
EventKind event_kind_from_string(std::string_view s);

struct GatewayEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::modem_status;
  nlohmann::json payload;
  std::string at;  // ISO-8601 UTC

  nlohmann::json to_json() const;
  // "id: <seq>\nevent: <kind>\ndata: <json>\n\n"
  std::string to_sse() const;
};

GatewayEvent event_from_json(const nlohmann::json& j);

// In-memory fan-out with a bounded replay window. Sequence numbers start at 1.
class EventBus {
 public:
  static constexpr std::size_t kRetention = 1024;

  explicit EventBus(std::size_t retention = kRetention);

  std::uint64_t publish(EventKind kind, nlohmann::json payload);
  // Retained events with seq > after, oldest first.
  std::vector<GatewayEvent> since(std::uint64_t after) const;
  // Like since(), but blocks up to `timeout` for at least one event.
  std::vector<GatewayEvent> wait(std::uint64_t after, std::chrono::milliseconds timeout) const;
  std::uint64_t last_seq() const;
  // Oldest retained seq, or 0 when empty.
  std::uint64_t first_retained() const;
  // Wakes every waiter; later waits return immediately.
  void close();
  bool closed() const;

 private:
  std::size_t retention_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::deque<GatewayEvent> events_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
};

}  // namespace cellgate::gateway
