#include "cellgate/gateway/gateway.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate::gateway {

using namespace std::chrono_literals;
using nlohmann::json;

namespace {

json endpoint_json(const UdpEndpoint& e) { return {{"addr", e.addr}, {"port", e.port}}; }

std::optional<UdpEndpoint> endpoint_from(const json& body) {
  if (!body.is_object() || !body.contains("rtp") || body.at("rtp").is_null()) return std::nullopt;
  const auto& r = body.at("rtp");
  if (!r.is_object() || !r.contains("addr") || !r.contains("port") || !r.at("addr").is_string() ||
      !r.at("port").is_number_unsigned() || r.at("port").get<unsigned>() > 65535) {
    fail(Errc::invalid_argument, "rtp must be {addr, port}");
  }
  return UdpEndpoint{r.at("addr").get<std::string>(), static_cast<std::uint16_t>(r.at("port").get<unsigned>())};
}

const std::string& required_string(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || !body.at(key).is_string()) {
    fail(Errc::invalid_argument, std::string("\"") + key + "\" is required");
  }
  return body.at(key).get_ref<const std::string&>();
}

bool constant_time_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

}  // namespace

json to_json(const call::CallInfo& c) {
  json j = {{"call_id", c.id},
            {"direction", call::to_string(c.direction)},
            {"peer", c.peer},
            {"state", call::to_string(c.state)},
            {"cause", call::to_string(c.cause)},
            {"rtp", {{"local", endpoint_json(c.rtp_local)}, {"payload_type", 0}, {"ssrc", c.ssrc}}},
            {"stats",
             {{"rtp_sent", c.rtp_sent},
              {"rtp_received", c.rtp_received},
              {"frames_from_modem", c.frames_from_modem},
              {"frames_to_modem", c.frames_to_modem}}}};
  if (c.rtp_remote) j["rtp"]["remote"] = endpoint_json(*c.rtp_remote);
  if (c.incoming) {
    j["type"] = c.incoming->type;
    if (c.incoming->priority) j["priority"] = *c.incoming->priority;
  }
  return j;
}

json mms_message_json(const mms::Pdu& pdu) {
  const auto& h = pdu.headers;
  json hj = json::object();
  if (h.transaction_id) hj["transaction_id"] = *h.transaction_id;
  if (h.message_id) hj["message_id"] = *h.message_id;
  hj["version"] = std::to_string(h.version.major) + "." + std::to_string(h.version.minor);
  if (h.from) hj["from"] = *h.from;
  if (!h.to.empty()) hj["to"] = h.to;
  if (!h.cc.empty()) hj["cc"] = h.cc;
  if (h.subject) hj["subject"] = *h.subject;
  if (h.message_class) hj["message_class"] = mms::to_string(*h.message_class);
  if (h.date) hj["date"] = *h.date;
  if (h.content_location) hj["content_location"] = *h.content_location;
  if (h.status) hj["status"] = mms::to_string(*h.status);
  if (h.response_status) hj["response_status"] = mms::response_status_name(*h.response_status);
  if (h.response_text) hj["response_text"] = *h.response_text;
  if (h.message_size) hj["message_size"] = *h.message_size;
  if (h.expiry) hj["expiry"] = {{"relative", h.expiry->relative}, {"value", h.expiry->value}};
  json j = {{"type", mms::to_string(pdu.type)}, {"headers", hj}};
  if (pdu.body) {
    json parts = json::array();
    for (const auto& p : pdu.body->parts) {
      json pj = {{"content_type", p.content_type}, {"size", p.data.size()}};
      if (p.content_id) pj["content_id"] = *p.content_id;
      if (p.content_type.starts_with("text/")) {
        pj["text"] = std::string(p.data.begin(), p.data.end());
      } else {
        pj["data"] = base64_encode(p.data);
      }
      parts.push_back(pj);
    }
    j["content_type"] = pdu.body->content_type;
    j["parts"] = parts;
  }
  return j;
}

json to_json(const mms::Transaction& t) {
  json history = json::array();
  for (const auto& tr : t.history) history.push_back(mms::to_string(tr.state));
  json j = {{"transaction_id", t.id},
            {"direction", mms::to_string(t.direction)},
            {"state", mms::to_string(t.state)},
            {"history", history}};
  if (!t.failure.empty()) j["failure"] = t.failure;
  if (t.message_id) j["message_id"] = *t.message_id;
  if (t.content_location) j["content_location"] = *t.content_location;
  if (t.message) j["message"] = mms_message_json(*t.message);
  return j;
}

std::pair<mms::Headers, mms::Body> mms_request_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::invalid_argument, "body must be an object");
  mms::Headers h;
  if (!j.contains("to")) fail(Errc::invalid_argument, "\"to\" is required");
  const auto& to = j.at("to");
  if (to.is_string()) {
    h.to.push_back(to.get<std::string>());
  } else if (to.is_array()) {
    for (const auto& t : to) {
      if (!t.is_string() || t.get<std::string>().empty()) fail(Errc::invalid_argument, "\"to\" entries must be strings");
      h.to.push_back(t.get<std::string>());
    }
  }
  if (h.to.empty()) fail(Errc::invalid_argument, "\"to\" must name at least one recipient");
  if (j.contains("subject") && !j.at("subject").is_null()) {
    if (!j.at("subject").is_string()) fail(Errc::invalid_argument, "\"subject\" must be a string");
    h.subject = j.at("subject").get<std::string>();
  }
  h.date = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
  h.message_class = mms::MessageClass::personal;

  mms::Body body;
  body.content_type = std::string(mms::kMultipartMixed);
  if (!j.contains("parts") || !j.at("parts").is_array() || j.at("parts").empty()) {
    fail(Errc::invalid_argument, "\"parts\" must be a non-empty array");
  }
  for (const auto& pj : j.at("parts")) {
    if (!pj.is_object()) fail(Errc::invalid_argument, "each part must be an object");
    mms::Part p;
    p.content_type = pj.value("content_type", std::string());
    if (p.content_type.empty()) fail(Errc::invalid_argument, "part content_type is required");
    if (pj.contains("content_id")) p.content_id = pj.at("content_id").get<std::string>();
    if (pj.contains("text")) {
      auto text = pj.at("text").get<std::string>();
      p.data.assign(text.begin(), text.end());
    } else if (pj.contains("data")) {
      p.data = base64_decode(pj.at("data").get<std::string>());
    } else {
      fail(Errc::invalid_argument, "part needs \"text\" or \"data\"");
    }
    body.parts.push_back(std::move(p));
  }
  return {std::move(h), std::move(body)};
}

std::string render_template(std::string_view tmpl, std::string_view time) {
  std::string out;
  constexpr std::string_view kTime = "{time}";
  std::size_t pos = 0;
  while (true) {
    auto hit = tmpl.find(kTime, pos);
    out.append(tmpl.substr(pos, hit == std::string_view::npos ? std::string_view::npos : hit - pos));
    if (hit == std::string_view::npos) break;
    out.append(time);
    pos = hit + kTime.size();
  }
  return out;
}

struct Gateway::Stack {
  std::unique_ptr<at::AtEngine> engine;
  std::unique_ptr<services::ModemServices> services;
  std::unique_ptr<call::CallManager> calls;
  std::thread urc_thread;
  std::atomic<bool> stop{false};
  std::atomic<bool> ready{false};
  services::ModemProfile profile;
  std::mutex catalog_mu;
  SteadyTime catalog_at{};

  ~Stack() {
    stop = true;
    if (urc_thread.joinable()) urc_thread.join();
    calls.reset();
    services.reset();
    if (engine) engine->close();
  }
};

Gateway::Gateway(GatewayConfig config) : config_(std::move(config)), shares_(config_.share_root) {
  if (!config_.quirk_profiles_path.empty()) quirks_ = at::load_quirk_profiles(config_.quirk_profiles_path);
  if (config_.surveillance) surveillance_ = *config_.surveillance;
  personalized_.push_back({"surveillance", "SMS alert to a configured number when motion is reported", {"sms"}});
  if (!config_.mmsc_url.empty()) {
    mms::MmsClient::Options opts;
    opts.auto_retrieve = config_.mms_auto_retrieve;
    mms_ = std::make_unique<mms::MmsClient>(config_.mmsc_url, opts);
    mms_->set_observer([this](const mms::Transaction& t) {
      if (t.direction != mms::Direction::receive) return;
      json p = {{"transaction_id", t.id}, {"state", mms::to_string(t.state)}};
      if (t.content_location) p["content_location"] = *t.content_location;
      if (t.message_id) p["message_id"] = *t.message_id;
      if (!t.failure.empty()) p["failure"] = t.failure;
      if (t.message) {
        if (t.message->headers.from) p["from"] = *t.message->headers.from;
        if (t.message->headers.subject) p["subject"] = *t.message->headers.subject;
      }
      events_.publish(EventKind::mms_notification, p);
    });
  }
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (started_) return;
  started_ = true;
  worker_ = std::thread([this] { worker(); });
  supervisor_ = std::thread([this] { supervise(); });
}

void Gateway::stop() {
  if (!started_ || stop_.exchange(true)) return;
  cv_.notify_all();
  jobs_cv_.notify_all();
  if (supervisor_.joinable()) supervisor_.join();
  if (worker_.joinable()) worker_.join();
  std::shared_ptr<Stack> s;
  {
    std::lock_guard lk(mu_);
    s.swap(stack_);
  }
  s.reset();
  events_.close();
}

bool Gateway::ready() const {
  auto s = stack();
  return s && s->ready;
}

bool Gateway::wait_ready(std::chrono::milliseconds timeout) const {
  std::unique_lock lk(mu_);
  return cv_.wait_for(lk, timeout, [&] { return stack_ && stack_->ready; });
}

std::optional<std::string> Gateway::owner_for_token(std::string_view token) const {
  if (constant_time_equal(token, config_.auth_token)) return config_.owner;
  for (const auto& [owner, t] : config_.users) {
    if (constant_time_equal(token, t)) return owner;
  }
  return std::nullopt;
}

std::shared_ptr<Gateway::Stack> Gateway::stack() const {
  std::lock_guard lk(mu_);
  return stack_;
}

std::shared_ptr<Gateway::Stack> Gateway::ready_stack() const {
  std::lock_guard lk(mu_);
  if (!stack_ || !stack_->ready) {
    fail(Errc::not_ready, "modem not ready" + (init_error_.empty() ? std::string() : ": " + init_error_));
  }
  return stack_;
}

void Gateway::supervise() {
  while (!stop_) {
    auto s = stack();
    if (s && s->engine->closed()) {
      spdlog::warn("gateway: modem transport closed, reconnecting");
      {
        std::lock_guard lk(mu_);
        stack_.reset();
        init_error_ = "modem transport closed";
      }
      s.reset();
      events_.publish(EventKind::modem_status, {{"ready", false}, {"reason", "transport closed"}});
    }
    if (!s) {
      try {
        s = connect();
        std::lock_guard lk(mu_);
        stack_ = s;
      } catch (const std::exception& e) {
        {
          std::lock_guard lk(mu_);
          init_error_ = e.what();
        }
        spdlog::debug("gateway: connect failed: {}", e.what());
      }
    }
    if (s && !s->ready && try_init(*s)) {
      cv_.notify_all();
      publish_status(*s);
    }
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, 1s, [&] { return stop_.load(); });
  }
}

std::shared_ptr<Gateway::Stack> Gateway::connect() {
  auto s = std::make_shared<Stack>();
  s->engine = std::make_unique<at::AtEngine>(open_transport(config_.transport));
  services::ModemServices::Config sc;
  sc.sim_pin = config_.sim_pin;
  sc.quirk_profiles = quirks_;
  sc.mms_configured = mms_ != nullptr;
  sc.text_mode = config_.sms_text_mode;
  sc.validity_relative = config_.sms_validity_relative;
  s->services = std::make_unique<services::ModemServices>(*s->engine, sc);
  call::CallManager::Options co;
  co.rtp_bind = config_.rtp_bind;
  if (config_.audio_transport) {
    auto spec = TransportSpec::parse(*config_.audio_transport);
    co.audio = [spec] { return open_transport(spec); };
  }
  s->calls = std::make_unique<call::CallManager>(*s->engine, co);
  s->calls->set_listener([this](call::CallManager::EventKind kind, const call::CallInfo& info) {
    events_.publish(kind == call::CallManager::EventKind::incoming_call ? EventKind::incoming_call
                                                                        : EventKind::call_state,
                    to_json(info));
  });
  Stack* raw = s.get();
  auto sub = std::make_shared<at::UrcSubscription>(s->engine->subscribe_urcs());
  s->urc_thread = std::thread([this, raw, sub] {
    while (!raw->stop) {
      std::optional<at::Urc> urc;
      try {
        urc = sub->next(100ms);
      } catch (const std::exception& e) {
        spdlog::warn("gateway: URC stream ended: {}", e.what());
        break;
      }
      if (!urc) continue;
      try {
        handle_urc(*raw, *urc);
      } catch (const std::exception& e) {
        spdlog::warn("gateway: handling {} failed: {}", urc->prefix, e.what());
      }
    }
  });
  spdlog::info("gateway: connected to modem at {}", config_.transport);
  return s;
}

bool Gateway::try_init(Stack& s) {
  try {
    auto [profile, catalog] = s.services->init();
    s.profile = profile;
    {
      std::lock_guard lk(s.catalog_mu);
      s.catalog_at = std::chrono::steady_clock::now();
    }
    {
      std::lock_guard lk(mu_);
      init_error_.clear();
      s.ready = true;
    }
    spdlog::info("gateway: modem {} {} ready, {} commands", profile.manufacturer, profile.model,
                 catalog.supported_commands.size());
    return true;
  } catch (const std::exception& e) {
    std::lock_guard lk(mu_);
    if (init_error_ != e.what()) spdlog::warn("gateway: modem init failed: {}", e.what());
    init_error_ = e.what();
    return false;
  }
}

void Gateway::handle_urc(Stack& s, const at::Urc& urc) {
  const auto& p = urc.prefix;
  if (p == "+CMTI") {
    auto params = split_at_params(urc.payload);
    if (params.size() < 2) return;
    auto index = parse_int(params[1]);
    if (!index) return;
    auto m = s.services->fetch_message(params[0], static_cast<int>(*index));
    json payload = services::to_json(m);
    payload["from"] = m.peer;
    events_.publish(EventKind::sms_received, payload);
  } else if (p == "+CREG") {
    auto params = split_at_params(urc.payload);
    if (params.empty()) return;
    auto stat = parse_int(params[0]);
    json payload = {{"ready", s.ready.load()},
                    {"registration", services::to_string(services::registration_from_stat(stat.value_or(-1)))}};
    events_.publish(EventKind::modem_status, payload);
  } else if (p == "RING" || p == "+CRING" || p == "+CLIP" || p == "NO CARRIER" || p == "BUSY" ||
             p == "NO ANSWER") {
    s.calls->on_urc(urc);
  } else {
    spdlog::debug("gateway: unhandled URC {} {}", p, urc.payload);
  }
}

void Gateway::publish_status(Stack& s) {
  json payload = {{"ready", s.ready.load()}, {"manufacturer", s.profile.manufacturer}, {"model", s.profile.model}};
  try {
    auto st = s.services->status();
    payload.update(services::to_json(st));
  } catch (const std::exception& e) {
    spdlog::debug("gateway: status read failed: {}", e.what());
  }
  events_.publish(EventKind::modem_status, payload);
}

void Gateway::post(std::function<void()> job) {
  {
    std::lock_guard lk(jobs_mu_);
    jobs_.push_back(std::move(job));
  }
  jobs_cv_.notify_one();
}

void Gateway::worker() {
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lk(jobs_mu_);
      jobs_cv_.wait(lk, [&] { return stop_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    try {
      job();
    } catch (const std::exception& e) {
      spdlog::warn("gateway: background job failed: {}", e.what());
    }
  }
}

services::CapabilityCatalog Gateway::catalog(Stack& s, bool refresh) {
  std::lock_guard lk(s.catalog_mu);
  auto now = std::chrono::steady_clock::now();
  if (refresh || now - s.catalog_at > 1s) {
    s.catalog_at = now;
    return s.services->refresh_catalog();
  }
  return s.services->catalog();
}

json Gateway::modem_status() {
  auto s = stack();
  json j = {{"ready", s && s->ready}, {"transport", config_.transport}};
  {
    std::lock_guard lk(mu_);
    if (!init_error_.empty()) j["init_error"] = init_error_;
  }
  if (!s || !s->ready) return j;
  j["manufacturer"] = s->profile.manufacturer;
  j["model"] = s->profile.model;
  j["quirk_profile"] = s->profile.quirk_profile ? json(*s->profile.quirk_profile) : json(nullptr);
  j.update(services::to_json(s->services->status()));
  return j;
}

json Gateway::services() {
  json list = json::array();
  std::set<std::string> names;
  json commands = json::array();
  bool probed = false;
  if (auto s = stack(); s && s->ready) {
    auto cat = catalog(*s, true);
    probed = cat.probed;
    for (const auto& c : cat.supported_commands) commands.push_back(c);
    for (auto svc : cat.derived_services) {
      json requires_cmds = json::array();
      for (const auto& rule : services::service_table()) {
        if (rule.service == svc) requires_cmds = rule.requires_all;
      }
      std::string name(services::to_string(svc));
      names.insert(name);
      list.push_back({{"name", name}, {"kind", "modem"}, {"commands", requires_cmds}});
    }
  }
  std::vector<PersonalizedService> personalized;
  {
    std::lock_guard lk(mu_);
    personalized = personalized_;
  }
  for (const auto& p : personalized) {
    bool ok = std::all_of(p.requires_services.begin(), p.requires_services.end(),
                          [&](const std::string& r) { return names.count(r) != 0; });
    if (!ok) continue;
    list.push_back(
        {{"name", p.name}, {"kind", "personalized"}, {"description", p.description}, {"requires", p.requires_services}});
  }
  return {{"services", list}, {"supported_commands", commands}, {"probed", probed}};
}

void Gateway::register_service(PersonalizedService service) {
  std::lock_guard lk(mu_);
  std::erase_if(personalized_, [&](const auto& p) { return p.name == service.name; });
  personalized_.push_back(std::move(service));
}

json Gateway::send_text(Stack& s, const std::string& to, const std::string& text) {
  if (!catalog(s, false).has(services::Service::sms) && !catalog(s, true).has(services::Service::sms)) {
    fail(Errc::capability_missing, "the modem does not offer sms");
  }
  services::SmsSendResult result;
  try {
    result = s.services->send_sms(to, text);
  } catch (const at::AtCommandError&) {
    if (!catalog(s, true).has(services::Service::sms)) fail(Errc::capability_missing, "the modem does not offer sms");
    throw;
  }
  json j;
  {
    std::lock_guard lk(mu_);
    j = {{"id", "sms-" + std::to_string(next_sms_++)}, {"segments", result.segments.size()}, {"refs", result.refs()}};
  }
  if (!result.all_ok()) {
    json failed = json::array();
    for (const auto& seg : result.segments) {
      if (!seg.message_ref) failed.push_back({{"seq", seg.seq}, {"error", seg.error}});
    }
    j["failed_segments"] = failed;
  }
  json record = j;
  record["to"] = to;
  record["text"] = text;
  record["at"] = iso8601_now();
  std::lock_guard lk(mu_);
  sent_sms_.push_back(record);
  if (sent_sms_.size() > 1000) sent_sms_.erase(sent_sms_.begin());
  return j;
}

json Gateway::sms_send(const json& body) {
  const auto& to = required_string(body, "to");
  const auto& text = required_string(body, "text");
  if (to.empty()) fail(Errc::invalid_argument, "\"to\" must not be empty");
  auto s = ready_stack();
  return send_text(*s, to, text);
}

json Gateway::sms_list(const std::string& box, const std::string& store) {
  if (box == "sent") {
    std::lock_guard lk(mu_);
    return sent_sms_;
  }
  std::string direction;
  if (box == "inbox") {
    direction = "deliver";
  } else if (box == "outbox") {
    direction = "submit";
  } else {
    fail(Errc::invalid_argument, "box must be inbox, outbox or sent");
  }
  auto s = ready_stack();
  json out = json::array();
  for (const auto& m : s->services->list_messages(store, services::ListFilter::all)) {
    if (m.direction == direction) out.push_back(services::to_json(m));
  }
  return out;
}

json Gateway::mms_send(const json& body) {
  if (!mms_) fail(Errc::capability_missing, "no MMSC configured");
  auto [headers, parts] = mms_request_from_json(body);
  static std::atomic<std::uint64_t> counter{0};
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
  std::string tid = "gw-" + std::to_string(ms) + "-" + std::to_string(++counter);
  headers.transaction_id = tid;
  {
    std::lock_guard lk(mu_);
    queued_mms_.insert(tid);
  }
  post([this, tid, h = std::move(headers), b = std::move(parts)]() mutable {
    try {
      auto message_id = mms_->send(std::move(h), std::move(b));
      spdlog::info("gateway: MMS {} confirmed as {}", tid, message_id);
    } catch (const std::exception& e) {
      spdlog::warn("gateway: MMS {} failed: {}", tid, e.what());
    }
    std::lock_guard lk(mu_);
    queued_mms_.erase(tid);
  });
  return {{"transaction_id", tid}};
}

json Gateway::mms_get(const std::string& id) const {
  if (!mms_) fail(Errc::capability_missing, "no MMSC configured");
  if (auto t = mms_->find(id)) return to_json(*t);
  std::lock_guard lk(mu_);
  if (queued_mms_.count(id)) return {{"transaction_id", id}, {"state", "queued"}};
  fail(Errc::not_found, "no MMS transaction " + id);
}

void Gateway::mms_push(std::span<const std::uint8_t> pdu) {
  if (!mms_) fail(Errc::capability_missing, "no MMSC configured");
  auto decoded = mms::decode_pdu(pdu);
  Bytes copy(pdu.begin(), pdu.end());
  switch (decoded.type) {
    case mms::MessageType::m_notification_ind:
      post([this, copy] { mms_->handle_notification(copy); });
      return;
    case mms::MessageType::m_delivery_ind: {
      auto report = mms_->handle_delivery_ind(copy);
      if (!report) fail(Errc::decode_failure, "malformed delivery report");
      json p = {{"message_id", report->message_id}, {"status", mms::to_string(report->status)}, {"to", report->to}};
      p["transaction_id"] = report->transaction_id ? json(*report->transaction_id) : json(nullptr);
      events_.publish(EventKind::mms_delivery, p);
      return;
    }
    default:
      fail(Errc::invalid_argument, "expected m-notification-ind or m-delivery-ind, got " +
                                       std::string(mms::to_string(decoded.type)));
  }
}

json Gateway::call_dial(const json& body) {
  const auto& to = required_string(body, "to");
  auto remote = endpoint_from(body);
  auto s = ready_stack();
  if (!catalog(*s, false).has(services::Service::voice)) fail(Errc::capability_missing, "the modem does not offer voice");
  auto info = s->calls->dial(to, remote);
  return {{"call_id", info.id},
          {"state", call::to_string(info.state)},
          {"rtp", {{"addr", info.rtp_local.addr}, {"port", info.rtp_local.port}, {"payload_type", 0}}}};
}

json Gateway::call_answer(const std::string& id, const json& body) {
  auto remote = endpoint_from(body);
  return to_json(ready_stack()->calls->answer(id, remote));
}

json Gateway::call_hangup(const std::string& id) { return to_json(ready_stack()->calls->hangup(id)); }

json Gateway::call_get(const std::string& id) {
  auto info = ready_stack()->calls->get(id);
  if (!info) fail(Errc::not_found, "no call " + id);
  return to_json(*info);
}

json Gateway::calls_list() {
  json out = json::array();
  for (const auto& c : ready_stack()->calls->list()) out.push_back(to_json(c));
  return out;
}

std::shared_ptr<call::AudioTap> Gateway::open_audio(const std::string& id) {
  return ready_stack()->calls->open_tap(id);
}

json Gateway::phonebook_list(const std::optional<std::string>& find) {
  auto s = ready_stack();
  std::vector<services::PhonebookEntry> entries;
  json limits;
  if (find) {
    entries = s->services->phonebook_find(*find);
  } else {
    auto l = s->services->phonebook_limits();
    limits = {{"first", l.first}, {"last", l.last}, {"number_length", l.number_length}, {"text_length", l.text_length}};
    entries = s->services->phonebook_read(l.first, l.last);
  }
  json out = json::array();
  for (const auto& e : entries) out.push_back(services::to_json(e));
  json j = {{"entries", out}};
  if (!limits.is_null()) j["limits"] = limits;
  return j;
}

json Gateway::phonebook_get(int index) {
  auto e = ready_stack()->services->phonebook_read(index);
  if (!e) fail(Errc::not_found, "phonebook slot " + std::to_string(index) + " is empty");
  return services::to_json(*e);
}

json Gateway::phonebook_put(std::optional<int> index, const json& body) {
  if (!body.is_object()) fail(Errc::invalid_argument, "body must be an object");
  services::PhonebookEntry e;
  try {
    json copy = body;
    if (index) copy["index"] = *index;
    if (!copy.contains("index")) copy["index"] = 0;
    e = services::phonebook_entry_from_json(copy);
  } catch (const json::exception& ex) {
    fail(Errc::invalid_argument, std::string("phonebook entry: ") + ex.what());
  }
  auto s = ready_stack();
  e.index = s->services->phonebook_write(e);
  return services::to_json(e);
}

void Gateway::phonebook_delete(int index) { ready_stack()->services->phonebook_delete(index); }

json Gateway::snapshot(const std::string& owner) {
  auto j = services::to_json(ready_stack()->services->snapshot());
  shares_.put(owner, "snapshot.json", j.dump(2), "application/json");
  return j;
}

json Gateway::sync(const json& body) {
  if (!body.is_object()) fail(Errc::invalid_argument, "body must be an object");
  auto s = ready_stack();
  services::Snapshot base;
  services::SyncEdits edits;
  try {
    base = body.contains("base") ? services::snapshot_from_json(body.at("base")) : s->services->snapshot();
    edits = services::sync_edits_from_json(body.contains("edits") ? body.at("edits") : body);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("sync: ") + e.what());
  }
  auto results = s->services->sync(base, edits);
  json out = json::array();
  int applied = 0, conflicts = 0;
  for (const auto& r : results) {
    out.push_back(services::to_json(r));
    if (r.result == "applied") ++applied;
    if (r.result == "conflict") ++conflicts;
  }
  return {{"results", out}, {"applied", applied}, {"conflicts", conflicts}};
}

json Gateway::surveillance() const {
  std::lock_guard lk(mu_);
  return to_json(surveillance_);
}

json Gateway::set_surveillance(const json& body) {
  auto cfg = surveillance_from_json(body);
  std::lock_guard lk(mu_);
  surveillance_ = cfg;
  return to_json(cfg);
}

json Gateway::motion(const json& body) {
  SurveillanceConfig cfg;
  {
    std::lock_guard lk(mu_);
    cfg = surveillance_;
  }
  if (!cfg.enabled) return {{"dispatched", false}, {"reason", "surveillance is disabled"}};
  std::string time = iso8601_now();
  if (body.is_object() && body.contains("time") && body.at("time").is_string()) time = body.at("time").get<std::string>();
  auto text = render_template(cfg.message_template, time);
  auto s = ready_stack();
  auto sms = send_text(*s, cfg.alert_number, text);
  json alert = {{"service", "surveillance"}, {"to", cfg.alert_number}, {"text", text}, {"sms_id", sms["id"]}};
  if (body.is_object() && body.contains("source")) alert["source"] = body.at("source");
  events_.publish(EventKind::service_alert, alert);
  return {{"dispatched", true}, {"text", text}, {"sms", sms}};
}

}  // namespace cellgate::gateway
