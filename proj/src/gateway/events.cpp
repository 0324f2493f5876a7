#include "cellgate/gateway/events.hpp"

#include <array>

#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate::gateway {

namespace {
constexpr std::array<std::pair<EventKind, std::string_view>, 7> kNames{{
    {EventKind::incoming_call, "incoming_call"},
    {EventKind::call_state, "call_state"},
    {EventKind::sms_received, "sms_received"},
    {EventKind::mms_notification, "mms_notification"},
    {EventKind::mms_delivery, "mms_delivery"},
    {EventKind::modem_status, "modem_status"},
    {EventKind::service_alert, "service_alert"},
}};
}  // namespace

std::string_view to_string(EventKind k) noexcept {
  for (const auto& [kind, name] : kNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kNames) {
    if (name == s) return kind;
  }
  fail(Errc::invalid_argument, "unknown event kind " + std::string(s));
}

nlohmann::json GatewayEvent::to_json() const {
  return {{"seq", seq}, {"kind", to_string(kind)}, {"at", at}, {"payload", payload}};
}

std::string GatewayEvent::to_sse() const {
  return "id: " + std::to_string(seq) + "\nevent: " + std::string(to_string(kind)) + "\ndata: " + to_json().dump() +
         "\n\n";
}

GatewayEvent event_from_json(const nlohmann::json& j) {
  GatewayEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.at = j.value("at", std::string());
  e.payload = j.value("payload", nlohmann::json::object());
  return e;
}

EventBus::EventBus(std::size_t retention) : retention_(retention == 0 ? 1 : retention) {}

std::uint64_t EventBus::publish(EventKind kind, nlohmann::json payload) {
  std::uint64_t seq;
  {
    std::lock_guard lk(mu_);
    seq = ++seq_;
    events_.push_back(GatewayEvent{seq, kind, std::move(payload), iso8601_now()});
    while (events_.size() > retention_) events_.pop_front();
  }
  cv_.notify_all();
  return seq;
}

std::vector<GatewayEvent> EventBus::since(std::uint64_t after) const {
  std::lock_guard lk(mu_);
  std::vector<GatewayEvent> out;
  for (const auto& e : events_) {
    if (e.seq > after) out.push_back(e);
  }
  return out;
}

std::vector<GatewayEvent> EventBus::wait(std::uint64_t after, std::chrono::milliseconds timeout) const {
  {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, timeout, [&] { return closed_ || seq_ > after; });
  }
  return since(after);
}

std::uint64_t EventBus::last_seq() const {
  std::lock_guard lk(mu_);
  return seq_;
}

std::uint64_t EventBus::first_retained() const {
  std::lock_guard lk(mu_);
  return events_.empty() ? 0 : events_.front().seq;
}

void EventBus::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventBus::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

}  // namespace cellgate::gateway
