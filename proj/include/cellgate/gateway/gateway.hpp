#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "json.hpp"
#include "cellgate/at/engine.hpp"
#include "cellgate/call/manager.hpp"
#include "cellgate/gateway/config.hpp"
#include "cellgate/gateway/events.hpp"
#include "cellgate/gateway/share.hpp"
#include "cellgate/mms/client.hpp"
#include "cellgate/services/modem_services.hpp"

namespace cellgate::gateway {

nlohmann::json to_json(const call::CallInfo& c);
nlohmann::json to_json(const mms::Transaction& t);
nlohmann::json mms_message_json(const mms::Pdu& pdu);
// {to[], subject?, parts[{content_type, content_id?, text | data(base64)}]}
std::pair<mms::Headers, mms::Body> mms_request_from_json(const nlohmann::json& j);
// Replaces every "{time}" with `time`.
std::string render_template(std::string_view tmpl, std::string_view time);

// Everything behind the HTTP routes. Methods take and return JSON documents and throw
// cellgate::Error; the HTTP layer maps codes to statuses.
class Gateway {
 public:
  struct PersonalizedService {
    std::string name;
    std::string description;
    std::vector<std::string> requires_services;
  };

  explicit Gateway(GatewayConfig config);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Connects and initialises the modem in the background; retries until stop().
  void start();
  void stop();
  // Blocks until the modem is ready or `timeout` passes.
  bool wait_ready(std::chrono::milliseconds timeout) const;
  bool ready() const;

  const GatewayConfig& config() const noexcept { return config_; }
  EventBus& events() noexcept { return events_; }
  ShareStore& shares() noexcept { return shares_; }
  // Owner bound to `token`, or nullopt when the token is unknown.
  std::optional<std::string> owner_for_token(std::string_view token) const;

  nlohmann::json modem_status();
  nlohmann::json services();
  void register_service(PersonalizedService service);

  nlohmann::json sms_send(const nlohmann::json& body);
  nlohmann::json sms_list(const std::string& box, const std::string& store);

  nlohmann::json mms_send(const nlohmann::json& body);
  nlohmann::json mms_get(const std::string& id) const;
  void mms_push(std::span<const std::uint8_t> pdu);

  nlohmann::json call_dial(const nlohmann::json& body);
  nlohmann::json call_answer(const std::string& id, const nlohmann::json& body);
  nlohmann::json call_hangup(const std::string& id);
  nlohmann::json call_get(const std::string& id);
  nlohmann::json calls_list();
  std::shared_ptr<call::AudioTap> open_audio(const std::string& id);

  nlohmann::json phonebook_list(const std::optional<std::string>& find);
  nlohmann::json phonebook_get(int index);
  nlohmann::json phonebook_put(std::optional<int> index, const nlohmann::json& body);
  void phonebook_delete(int index);
  // Also written to <owner>/snapshot.json in the share.
  nlohmann::json snapshot(const std::string& owner);
  nlohmann::json sync(const nlohmann::json& body);

  nlohmann::json surveillance() const;
  nlohmann::json set_surveillance(const nlohmann::json& body);
  nlohmann::json motion(const nlohmann::json& body);

 private:
  struct Stack;
  std::shared_ptr<Stack> stack() const;
  std::shared_ptr<Stack> ready_stack() const;
  void supervise();
  std::shared_ptr<Stack> connect();
  bool try_init(Stack& s);
  void dispatch_urcs(std::shared_ptr<Stack> s);
  void handle_urc(Stack& s, const at::Urc& urc);
  void publish_status(Stack& s);
  void post(std::function<void()> job);
  void worker();
  services::CapabilityCatalog catalog(Stack& s, bool refresh);
  nlohmann::json send_text(Stack& s, const std::string& to, const std::string& text);

  GatewayConfig config_;
  EventBus events_;
  ShareStore shares_;
  std::vector<at::QuirkProfile> quirks_;
  std::unique_ptr<mms::MmsClient> mms_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::shared_ptr<Stack> stack_;
  std::string init_error_;
  SurveillanceConfig surveillance_;
  std::vector<PersonalizedService> personalized_;
  std::set<std::string> queued_mms_;
  std::vector<nlohmann::json> sent_sms_;
  std::uint64_t next_sms_ = 1;

  std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::deque<std::function<void()>> jobs_;

  std::atomic<bool> stop_{false};
  bool started_ = false;
  std::thread supervisor_;
  std::thread worker_;
};

}  // namespace cellgate::gateway
