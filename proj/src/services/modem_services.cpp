#include "cellgate/services/modem_services.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "cellgate/error.hpp"

namespace cellgate::services {

using at::AtCommand;
using at::AtResponse;
using nlohmann::json;

namespace {

[[noreturn]] void raise(const AtResponse& r, const std::string& command) {
  using K = at::FinalResult::Kind;
  if (r.unsupported) fail(Errc::capability_missing, command + " is not supported by this modem");
  const int code = r.final.code;
  if (r.final.kind == K::cme_error) {
    switch (code) {
      case 10:
      case 11: fail(Errc::sim_pin_required, command + ": SIM PIN required");
      case 12: fail(Errc::sim_puk, command + ": SIM PUK required");
      case 20: fail(Errc::storage_full, command + ": memory full");
      case 21:
      case 22: fail(Errc::invalid_index, command + ": invalid index");
      case 24:
      case 26: fail(Errc::text_too_long, command + ": text string too long");
      default: break;
    }
  }
  if (r.final.kind == K::cms_error) {
    if (code == 321) fail(Errc::invalid_index, command + ": invalid memory index");
    if (code == 322) fail(Errc::storage_full, command + ": memory full");
  }
  throw at::AtCommandError(command, r.final);
}

std::string describe(const AtCommand& cmd) {
  auto s = at::serialize(cmd);
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::optional<long long> param_int(const std::vector<std::string>& p, std::size_t i) {
  if (i >= p.size()) return std::nullopt;
  return parse_int(trim(p[i]));
}

MessageStatus status_from_pdu_stat(long long stat) {
  switch (stat) {
    case 0: return MessageStatus::unread;
    case 1: return MessageStatus::read;
    case 2: return MessageStatus::unsent;
    default: return MessageStatus::sent;
  }
}

MessageStatus status_from_text(std::string_view s) {
  if (s == "REC UNREAD") return MessageStatus::unread;
  if (s == "REC READ") return MessageStatus::read;
  if (s == "STO UNSENT") return MessageStatus::unsent;
  return MessageStatus::sent;
}

// Commands probed with "=?" when +CLAC is refused.
const std::vector<std::string>& probe_list() {
  static const std::vector<std::string> kList = {"+CMGS", "+CMGR", "+CMGL", "+CMGD", "+CPMS", "+CHUP",
                                                 "+CPBS", "+CPBR", "+CPBW", "+CPBF", "+CSIM", "+CRSM"};
  return kList;
}

}  // namespace

// ---- pure helpers ----

std::string_view to_string(Registration r) noexcept {
  switch (r) {
    case Registration::not_registered: return "not_registered";
    case Registration::registered_home: return "registered_home";
    case Registration::searching: return "searching";
    case Registration::denied: return "denied";
    case Registration::unknown: return "unknown";
    case Registration::registered_roaming: return "registered_roaming";
  }
  return "unknown";
}

Registration registration_from_stat(long long stat) noexcept {
  switch (stat) {
    case 0: return Registration::not_registered;
    case 1: return Registration::registered_home;
    case 2: return Registration::searching;
    case 3: return Registration::denied;
    case 5: return Registration::registered_roaming;
    default: return Registration::unknown;
  }
}

std::optional<int> rssi_dbm_from_csq(long long n) noexcept {
  if (n < 0 || n > 31) return std::nullopt;
  return static_cast<int>(-113 + 2 * n);
}

std::optional<int> ber_from_csq(long long ber) noexcept {
  if (ber < 0 || ber > 7) return std::nullopt;
  return static_cast<int>(ber);
}

ModemStatus parse_csq(std::string_view raw) {
  ModemStatus s;
  auto p = split(raw, ',');
  if (auto n = param_int(p, 0)) s.rssi_dbm = rssi_dbm_from_csq(*n);
  if (auto b = param_int(p, 1)) s.ber_class = ber_from_csq(*b);
  return s;
}

std::string_view to_string(Service s) noexcept {
  switch (s) {
    case Service::sms: return "sms";
    case Service::mms: return "mms";
    case Service::voice: return "voice";
    case Service::phonebook: return "phonebook";
    case Service::sim_access: return "sim_access";
  }
  return "?";
}

const std::vector<ServiceRule>& service_table() {
  static const std::vector<ServiceRule> kTable = {
      {Service::sms, {"+CMGS", "+CMGR"}},
      {Service::voice, {"D", "A", "+CHUP"}},
      {Service::phonebook, {"+CPBS", "+CPBR", "+CPBW"}},
      {Service::sim_access, {"+CSIM"}},
  };
  return kTable;
}

std::set<Service> derive_services(const std::set<std::string>& commands, bool mms_configured) {
  std::set<Service> out;
  for (const auto& rule : service_table()) {
    if (std::all_of(rule.requires_all.begin(), rule.requires_all.end(),
                    [&](const std::string& c) { return commands.count(c) != 0; })) {
      out.insert(rule.service);
    }
  }
  if (mms_configured) out.insert(Service::mms);
  return out;
}

std::string normalize_command_name(std::string_view name) {
  auto s = to_upper(trim(name));
  if (s.size() > 2 && s.starts_with("AT")) s.erase(0, 2);
  while (!s.empty() && (s.back() == '?' || s.back() == '=')) s.pop_back();
  return s;
}

std::string_view to_string(MessageStatus s) noexcept {
  switch (s) {
    case MessageStatus::unread: return "unread";
    case MessageStatus::read: return "read";
    case MessageStatus::unsent: return "unsent";
    case MessageStatus::sent: return "sent";
  }
  return "?";
}

std::vector<int> SmsSendResult::refs() const {
  std::vector<int> out;
  for (const auto& s : segments) {
    if (s.message_ref) out.push_back(*s.message_ref);
  }
  return out;
}

bool SmsSendResult::all_ok() const {
  return std::all_of(segments.begin(), segments.end(), [](const SegmentOutcome& s) { return s.message_ref.has_value(); });
}

SyncEdits diff_phonebook(const std::vector<PhonebookEntry>& base, const std::vector<PhonebookEntry>& desired) {
  SyncEdits edits;
  for (const auto& d : desired) {
    if (d.index > 0) {
      auto it = std::find_if(base.begin(), base.end(), [&](const PhonebookEntry& b) { return b.index == d.index; });
      if (it == base.end() || it->number != d.number || it->text != d.text || it->type != d.type) {
        edits.phonebook_upserts.push_back(d);
      }
      continue;
    }
    bool known = std::any_of(base.begin(), base.end(), [&](const PhonebookEntry& b) {
      return b.number == d.number && b.text == d.text;
    });
    if (!known) edits.phonebook_upserts.push_back(d);
  }
  return edits;
}

json to_json(const ModemStatus& s) {
  json j;
  j["registration"] = s.registration ? json(std::string(to_string(*s.registration))) : json(nullptr);
  j["rssi_dbm"] = s.rssi_dbm ? json(*s.rssi_dbm) : json(nullptr);
  j["ber_class"] = s.ber_class ? json(*s.ber_class) : json(nullptr);
  return j;
}

json to_json(const StoredMessage& m) {
  json j = {{"store", m.store},       {"index", m.index}, {"status", std::string(to_string(m.status))},
            {"direction", m.direction}, {"peer", m.peer},   {"text", m.text},
            {"pdu", m.pdu}};
  j["timestamp"] = m.timestamp ? json(*m.timestamp) : json(nullptr);
  if (m.concat) j["concat"] = {{"ref", m.concat->ref}, {"total", m.concat->total}, {"seq", m.concat->seq}};
  return j;
}

json to_json(const PhonebookEntry& e) {
  return {{"index", e.index}, {"number", e.number}, {"type", e.type}, {"text", e.text}};
}

json to_json(const Snapshot& s) {
  json pb = json::array();
  for (const auto& e : s.phonebook) pb.push_back(to_json(e));
  json msgs = json::array();
  for (const auto& [store, list] : s.messages) {
    for (const auto& m : list) msgs.push_back(to_json(m));
  }
  return {{"taken_at", s.taken_at}, {"phonebook", pb}, {"messages", msgs}, {"media", s.media}};
}

json to_json(const SyncItemResult& r) {
  return {{"target", r.target}, {"op", r.op}, {"index", r.index}, {"result", r.result}, {"detail", r.detail}};
}

PhonebookEntry phonebook_entry_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::invalid_argument, "phonebook entry must be an object");
  PhonebookEntry e;
  e.index = j.value("index", 0);
  e.number = j.value("number", std::string());
  e.text = j.value("text", std::string());
  e.type = j.value("type", e.number.starts_with("+") ? 145 : 129);
  if (e.number.empty()) fail(Errc::invalid_argument, "phonebook entry needs a number");
  return e;
}

Snapshot snapshot_from_json(const json& j) {
  Snapshot s;
  s.taken_at = j.value("taken_at", std::string());
  for (const auto& e : j.value("phonebook", json::array())) s.phonebook.push_back(phonebook_entry_from_json(e));
  for (const auto& m : j.value("messages", json::array())) {
    StoredMessage sm;
    sm.store = m.value("store", std::string("SM"));
    sm.index = m.value("index", 0);
    sm.pdu = m.value("pdu", std::string());
    sm.text = m.value("text", std::string());
    sm.peer = m.value("peer", std::string());
    sm.direction = m.value("direction", std::string());
    s.messages[sm.store].push_back(sm);
  }
  s.media = j.value("media", std::vector<std::string>{});
  return s;
}

SyncEdits sync_edits_from_json(const json& j) {
  SyncEdits e;
  for (const auto& u : j.value("phonebook_upserts", json::array())) e.phonebook_upserts.push_back(phonebook_entry_from_json(u));
  e.phonebook_deletes = j.value("phonebook_deletes", std::vector<int>{});
  for (const auto& d : j.value("message_deletes", json::array())) {
    e.message_deletes.emplace_back(d.value("store", std::string("SM")), d.value("index", 0));
  }
  return e;
}

// ---- ModemServices ----

ModemServices::ModemServices(at::AtEngine& engine, Config config) : engine_(engine), config_(std::move(config)) {}

AtResponse ModemServices::run(const AtCommand& cmd) { return engine_.execute(cmd); }

AtResponse ModemServices::run_ok(const AtCommand& cmd) {
  auto r = run(cmd);
  if (!r.ok()) raise(r, describe(cmd));
  return r;
}

bool ModemServices::ready() const {
  std::lock_guard lk(mu_);
  return ready_;
}

void ModemServices::require(Service s) const {
  std::lock_guard lk(mu_);
  if (!ready_) fail(Errc::not_ready, "modem is not initialised");
  if (!catalog_.has(s)) fail(Errc::capability_missing, "modem does not offer " + std::string(to_string(s)));
}

std::pair<ModemProfile, CapabilityCatalog> ModemServices::init() {
  auto step = [&](const AtCommand& cmd) {
    try {
      return run_ok(cmd);
    } catch (const Error& e) {
      if (e.code() == Errc::sim_pin_required || e.code() == Errc::sim_puk) throw;
      fail(Errc::init_failed, "init " + describe(cmd) + ": " + e.what());
    }
  };
  {
    std::lock_guard lk(mu_);
    ready_ = false;
    message_store_.clear();
    phonebook_store_.clear();
    limits_.reset();
  }
  engine_.set_quirk_profile(std::nullopt);
  step(AtCommand::execute("E0"));
  step(AtCommand::set("+CMEE", {1LL}));

  auto pin = trim(step(AtCommand::read("+CPIN")).value("+CPIN"));
  if (pin == "SIM PIN") {
    if (!config_.sim_pin) fail(Errc::sim_pin_required, "SIM is locked and no PIN is configured");
    auto r = run(AtCommand::set("+CPIN", {*config_.sim_pin}));
    if (!r.ok()) fail(Errc::sim_pin_required, "SIM rejected the configured PIN: " + r.final.text);
  } else if (pin == "SIM PUK") {
    fail(Errc::sim_puk, "SIM is PUK-locked");
  } else if (pin != "READY") {
    fail(Errc::init_failed, "unexpected +CPIN state: " + std::string(pin));
  }

  ModemProfile profile;
  auto first_line = [](const AtResponse& r) {
    for (const auto& l : r.info) {
      auto t = trim(l.text);
      if (!t.empty()) return std::string(t);
    }
    return std::string();
  };
  profile.manufacturer = first_line(step(AtCommand::execute("+CGMI")));
  profile.model = first_line(step(AtCommand::execute("+CGMM")));
  if (const auto* q = at::select_profile(config_.quirk_profiles, profile.manufacturer, profile.model)) {
    profile.quirk_profile = q->model_match;
    engine_.set_quirk_profile(*q);
    spdlog::info("quirk profile '{}' selected for {} {}", q->model_match, profile.manufacturer, profile.model);
    for (const auto& cmd : q->extra_init) step(cmd);
  }

  for (const auto& cmd : {AtCommand::set("+CRC", {1LL}), AtCommand::set("+CLIP", {1LL}),
                          AtCommand::set("+CNMI", {2LL, 1LL}), AtCommand::set("+CMGF", {config_.text_mode ? 1LL : 0LL})}) {
    auto r = run(cmd);
    if (r.unsupported) continue;
    if (!r.ok()) fail(Errc::init_failed, "init " + describe(cmd) + ": " + r.final.text);
  }

  bool probed = false;
  auto commands = read_command_list(probed);
  CapabilityCatalog cat;
  cat.supported_commands = std::move(commands);
  cat.derived_services = derive_services(cat.supported_commands, config_.mms_configured);
  cat.probed = probed;
  {
    std::lock_guard lk(mu_);
    profile_ = profile;
    catalog_ = cat;
    ready_ = true;
  }
  spdlog::info("modem {} {} ready, {} commands", profile.manufacturer, profile.model, cat.supported_commands.size());
  return {profile, cat};
}

std::set<std::string> ModemServices::read_command_list(bool& probed) {
  std::set<std::string> out;
  auto r = run(AtCommand::execute("+CLAC"));
  auto quirks = engine_.quirk_profile();
  if (r.ok()) {
    probed = false;
    for (const auto& l : r.info) {
      std::string_view t = trim(l.text);
      if (starts_with_icase(t, "+CLAC:")) t = trim(t.substr(6));
      for (const auto& part : split(t, ',')) {
        auto name = normalize_command_name(part);
        if (!name.empty()) out.insert(name);
      }
    }
  } else {
    probed = true;
    spdlog::info("+CLAC refused ({}); probing commands", r.final.text);
    // Dial and answer have no test form; every V.250 modem has them.
    out.insert("D");
    out.insert("A");
    for (const auto& name : probe_list()) {
      try {
        if (run(AtCommand::test(name)).ok()) out.insert(name);
      } catch (const Error& e) {
        spdlog::debug("probe {}: {}", name, e.what());
      }
    }
  }
  if (quirks) {
    for (const auto& [name, replacement] : quirks->command_overrides) {
      if (replacement == at::kUnsupported) out.erase(normalize_command_name(name));
    }
  }
  return out;
}

CapabilityCatalog ModemServices::catalog() const {
  std::lock_guard lk(mu_);
  return catalog_;
}

CapabilityCatalog ModemServices::refresh_catalog() {
  if (!ready()) fail(Errc::not_ready, "modem is not initialised");
  bool probed = false;
  auto commands = read_command_list(probed);
  std::lock_guard lk(mu_);
  catalog_.supported_commands = std::move(commands);
  catalog_.derived_services = derive_services(catalog_.supported_commands, config_.mms_configured);
  catalog_.probed = probed;
  return catalog_;
}

ModemStatus ModemServices::status() {
  ModemStatus s;
  try {
    auto r = run(AtCommand::execute("+CSQ"));
    if (r.ok()) s = parse_csq(r.value("+CSQ"));
  } catch (const Error& e) {
    spdlog::debug("+CSQ: {}", e.what());
  }
  try {
    auto r = run(AtCommand::read("+CREG"));
    if (r.ok()) {
      auto p = split(r.value("+CREG"), ',');
      auto stat = param_int(p, p.size() >= 2 ? 1 : 0);
      if (stat) s.registration = registration_from_stat(*stat);
    }
  } catch (const Error& e) {
    spdlog::debug("+CREG?: {}", e.what());
  }
  return s;
}

SmsSendResult ModemServices::send_sms(const std::string& to, const std::string& text) {
  require(Service::sms);
  sms::Address dest;
  try {
    dest = sms::Address::parse(to);
    dest.validate();
    if (dest.ton == sms::Ton::alphanumeric) fail(Errc::invalid_number, "cannot send to an alphanumeric address");
  } catch (const Error& e) {
    fail(Errc::invalid_number, "bad destination " + to + ": " + e.what());
  }
  auto alphabet = sms::choose_alphabet(text);
  std::uint16_t ref;
  {
    std::lock_guard lk(mu_);
    ref = static_cast<std::uint16_t>(++concat_ref_ & 0xFF);
  }
  auto segments = sms::segment(text, alphabet, ref);
  SmsSendResult result;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    SegmentOutcome out;
    out.seq = static_cast<int>(i + 1);
    try {
      std::string payload;
      AtCommand cmd;
      if (config_.text_mode) {
        cmd = AtCommand::set("+CMGS", {dest.to_string()});
        payload = segments[i].text;
      } else {
        sms::SmsSubmit sub;
        sub.destination = dest;
        sub.dcs = alphabet;
        sub.validity_relative = config_.validity_relative;
        sub.user_data = segments[i].text;
        sub.udh = segments[i].udh;
        auto enc = sms::encode_submit(sub);
        cmd = AtCommand::set("+CMGS", {static_cast<long long>(enc.tpdu_len)});
        payload = enc.hex;
      }
      cmd.expects_prompt = true;
      auto exchange = engine_.begin_payload(cmd);
      auto r = exchange.send(payload);
      if (!r.ok()) raise(r, "+CMGS");
      auto mr = parse_int(trim(r.value("+CMGS")));
      out.message_ref = static_cast<int>(mr.value_or(0));
    } catch (const at::AtCommandError& e) {
      if (e.final().kind == at::FinalResult::Kind::cms_error) out.cms_error = e.final().code;
      out.error = e.what();
      if (i == 0) throw;
    } catch (const Error& e) {
      out.error = e.what();
      if (i == 0) throw;
    }
    result.segments.push_back(std::move(out));
  }
  return result;
}

void ModemServices::select_message_store(const std::string& store) {
  if (store != "SM" && store != "ME" && store != "MT") fail(Errc::invalid_argument, "unknown message store " + store);
  {
    std::lock_guard lk(mu_);
    if (message_store_ == store) return;
  }
  run_ok(AtCommand::set("+CPMS", {store, store, store}));
  std::lock_guard lk(mu_);
  message_store_ = store;
}

StoredMessage ModemServices::decode_stored(const std::string& store, int index, int stat, const std::string& pdu) const {
  StoredMessage m;
  m.store = store;
  m.index = index;
  m.status = status_from_pdu_stat(stat);
  m.pdu = pdu;
  auto any = sms::decode_any(pdu);
  if (auto* d = std::get_if<sms::SmsDeliver>(&any)) {
    m.direction = "deliver";
    m.peer = d->originator.to_string();
    m.text = d->user_data;
    m.timestamp = d->timestamp.to_iso8601();
    m.concat = d->udh;
  } else {
    auto& s = std::get<sms::SmsSubmit>(any);
    m.direction = "submit";
    m.peer = s.destination.to_string();
    m.text = s.user_data;
    m.concat = s.udh;
  }
  return m;
}

StoredMessage ModemServices::fetch_message(const std::string& store, int index) {
  if (index < 0) fail(Errc::invalid_index, "negative message index");
  select_message_store(store);
  auto r = run_ok(AtCommand::set("+CMGR", {static_cast<long long>(index)}));
  for (std::size_t i = 0; i < r.info.size(); ++i) {
    if (r.info[i].prefix != "+CMGR") continue;
    auto p = split_at_params(r.info[i].raw_values);
    if (config_.text_mode) {
      StoredMessage m;
      m.store = store;
      m.index = index;
      m.status = status_from_text(p.empty() ? "" : p[0]);
      m.direction = m.status == MessageStatus::unread || m.status == MessageStatus::read ? "deliver" : "submit";
      if (p.size() > 1) m.peer = p[1];
      if (p.size() > 3 && !p[3].empty()) m.timestamp = p[3];
      for (std::size_t k = i + 1; k < r.info.size(); ++k) {
        if (!m.text.empty()) m.text += "\n";
        m.text += r.info[k].text;
      }
      return m;
    }
    if (i + 1 >= r.info.size()) break;
    return decode_stored(store, index, static_cast<int>(param_int(p, 0).value_or(0)), std::string(trim(r.info[i + 1].text)));
  }
  fail(Errc::invalid_index, "+CMGR returned no message at " + store + "/" + std::to_string(index));
}

std::vector<StoredMessage> ModemServices::list_messages(const std::string& store, ListFilter filter) {
  select_message_store(store);
  AtCommand cmd;
  if (config_.text_mode) {
    const char* f = filter == ListFilter::unread ? "REC UNREAD" : filter == ListFilter::read ? "REC READ" : "ALL";
    cmd = AtCommand::set("+CMGL", {std::string(f)});
  } else {
    long long f = filter == ListFilter::unread ? 0 : filter == ListFilter::read ? 1 : 4;
    cmd = AtCommand::set("+CMGL", {f});
  }
  auto r = run_ok(cmd);
  std::vector<StoredMessage> out;
  for (std::size_t i = 0; i < r.info.size(); ++i) {
    if (r.info[i].prefix != "+CMGL") continue;
    auto p = split_at_params(r.info[i].raw_values);
    int index = static_cast<int>(param_int(p, 0).value_or(0));
    std::string body = i + 1 < r.info.size() && r.info[i + 1].prefix != "+CMGL" ? r.info[i + 1].text : "";
    try {
      if (config_.text_mode) {
        StoredMessage m;
        m.store = store;
        m.index = index;
        m.status = status_from_text(p.size() > 1 ? p[1] : "");
        m.direction = m.status == MessageStatus::unread || m.status == MessageStatus::read ? "deliver" : "submit";
        if (p.size() > 2) m.peer = p[2];
        if (p.size() > 4 && !p[4].empty()) m.timestamp = p[4];
        m.text = body;
        out.push_back(std::move(m));
      } else {
        out.push_back(decode_stored(store, index, static_cast<int>(param_int(p, 1).value_or(0)), std::string(trim(body))));
      }
    } catch (const Error& e) {
      spdlog::warn("skipping undecodable message {}/{}: {}", store, index, e.what());
    }
  }
  return out;
}

void ModemServices::delete_message(const std::string& store, int index) {
  select_message_store(store);
  run_ok(AtCommand::set("+CMGD", {static_cast<long long>(index)}));
}

void ModemServices::phonebook_select(const std::string& store) {
  if (store != "SM" && store != "ME" && store != "MT") fail(Errc::invalid_argument, "unknown phonebook store " + store);
  require(Service::phonebook);
  run_ok(AtCommand::set("+CPBS", {store}));
  std::lock_guard lk(mu_);
  phonebook_store_ = store;
  limits_.reset();
}

PhonebookLimits ModemServices::phonebook_limits() {
  require(Service::phonebook);
  {
    std::lock_guard lk(mu_);
    if (limits_) return *limits_;
  }
  auto r = run_ok(AtCommand::test("+CPBR"));
  auto raw = r.value("+CPBR");
  PhonebookLimits l;
  auto open = raw.find('('), close = raw.find(')');
  if (open == std::string::npos || close == std::string::npos) fail(Errc::decode_failure, "bad +CPBR=? reply: " + raw);
  auto range = raw.substr(open + 1, close - open - 1);
  auto dash = range.find('-');
  l.first = static_cast<int>(parse_int(range.substr(0, dash)).value_or(1));
  l.last = static_cast<int>(dash == std::string::npos ? l.first : parse_int(range.substr(dash + 1)).value_or(0));
  auto rest = split(raw.substr(close + 1), ',');
  if (auto v = param_int(rest, 1)) l.number_length = static_cast<int>(*v);
  if (auto v = param_int(rest, 2)) l.text_length = static_cast<int>(*v);
  std::lock_guard lk(mu_);
  limits_ = l;
  return l;
}

std::vector<PhonebookEntry> ModemServices::parse_entries(const AtResponse& r, std::string_view prefix) const {
  std::vector<PhonebookEntry> out;
  for (const auto& v : r.values(prefix)) {
    auto p = split_at_params(v);
    if (p.size() < 2) continue;
    PhonebookEntry e;
    e.index = static_cast<int>(param_int(p, 0).value_or(0));
    e.number = p[1];
    e.type = static_cast<int>(param_int(p, 2).value_or(129));
    if (p.size() > 3) e.text = p[3];
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<PhonebookEntry> ModemServices::phonebook_read(int first, int last) {
  auto l = phonebook_limits();
  if (first < l.first || last > l.last || first > last) {
    fail(Errc::invalid_index, "phonebook range " + std::to_string(first) + "-" + std::to_string(last) +
                                  " outside " + std::to_string(l.first) + "-" + std::to_string(l.last));
  }
  auto r = run_ok(AtCommand::set("+CPBR", {static_cast<long long>(first), static_cast<long long>(last)}));
  return parse_entries(r, "+CPBR");
}

std::optional<PhonebookEntry> ModemServices::phonebook_read(int index) {
  auto entries = phonebook_read(index, index);
  if (entries.empty()) return std::nullopt;
  return entries.front();
}

int ModemServices::phonebook_write(const PhonebookEntry& entry) {
  auto l = phonebook_limits();
  if (l.text_length > 0 && static_cast<int>(utf8_decode(entry.text).size()) > l.text_length) {
    fail(Errc::text_too_long, "phonebook text exceeds " + std::to_string(l.text_length) + " characters");
  }
  if (entry.number.empty() || (l.number_length > 0 && static_cast<int>(entry.number.size()) > l.number_length)) {
    fail(Errc::invalid_argument, "phonebook number must be 1-" + std::to_string(l.number_length) + " characters");
  }
  if (entry.index != 0 && (entry.index < l.first || entry.index > l.last)) {
    fail(Errc::invalid_index, "phonebook index " + std::to_string(entry.index) + " out of range");
  }
  AtCommand::Arg index = std::monostate{};
  if (entry.index != 0) index = static_cast<long long>(entry.index);
  auto r = run_ok(AtCommand::set("+CPBW", {index, entry.number, static_cast<long long>(entry.type), entry.text}));
  if (entry.index != 0) return entry.index;
  if (auto v = parse_int(trim(r.value("+CPBW")))) return static_cast<int>(*v);
  // Standard +CPBW does not report the slot it picked; find it.
  for (const auto& e : phonebook_read(l.first, l.last)) {
    if (e.number == entry.number && e.text == entry.text) return e.index;
  }
  fail(Errc::command_failed, "written phonebook entry not found on read-back");
}

void ModemServices::phonebook_delete(int index) {
  require(Service::phonebook);
  run_ok(AtCommand::set("+CPBW", {static_cast<long long>(index)}));
}

std::vector<PhonebookEntry> ModemServices::phonebook_find(const std::string& prefix) {
  require(Service::phonebook);
  auto r = run_ok(AtCommand::set("+CPBF", {prefix}));
  return parse_entries(r, "+CPBF");
}

Bytes ModemServices::sim_apdu(std::span<const std::uint8_t> command) {
  return from_hex(sim_apdu_hex(to_hex(command)));
}

std::string ModemServices::sim_apdu_hex(std::string_view command_hex) {
  Bytes bytes;
  try {
    bytes = from_hex(command_hex);
  } catch (const Error& e) {
    fail(Errc::invalid_argument, std::string("APDU: ") + e.what());
  }
  if (bytes.empty()) fail(Errc::invalid_argument, "empty APDU");
  require(Service::sim_access);
  auto hex = to_hex(bytes);
  auto r = run_ok(AtCommand::set("+CSIM", {static_cast<long long>(hex.size()), hex}));
  auto p = split_at_params(r.value("+CSIM"));
  if (p.size() < 2) fail(Errc::decode_failure, "bad +CSIM reply");
  return to_upper(p[1]);
}

Snapshot ModemServices::snapshot() {
  Snapshot s;
  s.taken_at = iso8601_now();
  if (catalog().has(Service::phonebook)) {
    auto l = phonebook_limits();
    for (int first = l.first; first <= l.last; first += 50) {
      auto chunk = phonebook_read(first, std::min(l.last, first + 49));
      s.phonebook.insert(s.phonebook.end(), chunk.begin(), chunk.end());
    }
  }
  if (catalog().has(Service::sms)) {
    for (const std::string store : {"SM", "ME"}) {
      try {
        s.messages[store] = list_messages(store, ListFilter::all);
      } catch (const Error& e) {
        spdlog::debug("snapshot: store {} skipped: {}", store, e.what());
      }
    }
  }
  return s;
}

std::vector<SyncItemResult> ModemServices::sync(const Snapshot& base, const SyncEdits& edits) {
  std::vector<SyncItemResult> out;
  auto base_entry = [&](int index) -> std::optional<PhonebookEntry> {
    for (const auto& e : base.phonebook) {
      if (e.index == index) return e;
    }
    return std::nullopt;
  };
  auto same = [](const std::optional<PhonebookEntry>& a, const std::optional<PhonebookEntry>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->number == b->number && a->text == b->text);
  };
  auto attempt = [&](SyncItemResult item, const std::function<void()>& apply) {
    try {
      apply();
      item.result = "applied";
    } catch (const Error& e) {
      item.result = "error";
      item.detail = e.what();
    }
    out.push_back(std::move(item));
  };

  for (const auto& e : edits.phonebook_upserts) {
    SyncItemResult item{"phonebook", e.index == 0 ? "add" : "update", e.index, "", ""};
    if (e.index != 0) {
      std::optional<PhonebookEntry> current;
      try {
        current = phonebook_read(e.index);
      } catch (const Error& err) {
        out.push_back({"phonebook", "update", e.index, "error", err.what()});
        continue;
      }
      if (!same(current, base_entry(e.index))) {
        item.result = "conflict";
        item.detail = "entry changed on the modem since the snapshot";
        out.push_back(std::move(item));
        continue;
      }
    }
    int written = e.index;
    attempt(item, [&] { written = phonebook_write(e); });
    out.back().index = written;
  }
  for (int index : edits.phonebook_deletes) {
    std::optional<PhonebookEntry> current;
    try {
      current = phonebook_read(index);
    } catch (const Error& err) {
      out.push_back({"phonebook", "delete", index, "error", err.what()});
      continue;
    }
    if (!same(current, base_entry(index))) {
      out.push_back({"phonebook", "delete", index, "conflict", "entry changed on the modem since the snapshot"});
      continue;
    }
    attempt({"phonebook", "delete", index, "", ""}, [&] { phonebook_delete(index); });
  }
  for (const auto& [store, index] : edits.message_deletes) {
    std::optional<std::string> base_pdu;
    if (auto it = base.messages.find(store); it != base.messages.end()) {
      for (const auto& m : it->second) {
        if (m.index == index) base_pdu = m.pdu;
      }
    }
    std::optional<std::string> current_pdu;
    try {
      current_pdu = fetch_message(store, index).pdu;
    } catch (const Error& err) {
      if (err.code() != Errc::invalid_index) {
        out.push_back({"message", "delete", index, "error", err.what()});
        continue;
      }
    }
    if (current_pdu != base_pdu) {
      out.push_back({"message", "delete", index, "conflict", "message changed on the modem since the snapshot"});
      continue;
    }
    attempt({"message", "delete", index, "", ""}, [&, store = store, index = index] { delete_message(store, index); });
  }
  return out;
}

}  // namespace cellgate::services
