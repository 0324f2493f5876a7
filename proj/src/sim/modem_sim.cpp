#include "cellgate/sim/modem_sim.hpp"

#include <algorithm>
#include <ctime>

#include "cellgate/util.hpp"

namespace cellgate::sim {

using nlohmann::json;

namespace {

const std::set<std::string> kSimCommands = {"+CMGS", "+CMGR", "+CMGL", "+CMGD", "+CPMS", "+CPBS",
                                            "+CPBR", "+CPBW", "+CPBF", "+CSIM", "+CRSM"};
const std::set<std::string> kSmsCommands = {"+CMGS", "+CMGR", "+CMGL", "+CMGD", "+CPMS"};

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::optional<int> as_int(const std::vector<std::string>& p, std::size_t i) {
  if (i >= p.size()) return std::nullopt;
  auto v = parse_int(trim(p[i]));
  if (!v) return std::nullopt;
  return static_cast<int>(*v);
}

// Octets after the service-centre address.
int tpdu_length(const std::string& pdu_hex) {
  if (pdu_hex.size() < 2) return 0;
  int sca = std::stoi(pdu_hex.substr(0, 2), nullptr, 16);
  return static_cast<int>(pdu_hex.size() / 2) - 1 - sca;
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::string two(int v) {
  char b[16];
  std::snprintf(b, sizeof b, "%02d", v);
  return b;
}

}  // namespace

const std::set<std::string>& implemented_commands() {
  static const std::set<std::string> kAll = {
      "A",     "D",     "E",     "H",     "+CHUP", "+CPIN", "+CMEE", "+CGMI", "+CGMM", "+CSQ",
      "+CREG", "+CRC",  "+CLIP", "+CNMI", "+CMGF", "+CMGS", "+CMGR", "+CMGL", "+CMGD", "+CPMS",
      "+CPBS", "+CPBR", "+CPBW", "+CPBF", "+CSIM", "+CRSM", "+CLAC", "+CSTA"};
  return kAll;
}

ModemSim::ModemSim(SimConfig config, std::shared_ptr<Clock> clock) : cfg_(std::move(config)), clock_(std::move(clock)) {
  stores_["SM"];
  stores_["ME"];
  phonebooks_["SM"];
  phonebooks_["ME"];
}

// ---- output ----

void ModemSim::reply(const std::string& line) { out_ += "\r\n" + line + "\r\n"; }

void ModemSim::cme(int code) {
  if (cmee_ == 0) {
    error();
  } else {
    reply("+CME ERROR: " + std::to_string(code));
  }
}

void ModemSim::cms(int code) { reply("+CMS ERROR: " + std::to_string(code)); }

std::string ModemSim::take_output() {
  std::lock_guard lk(mu_);
  std::string out;
  out.swap(out_);
  return out;
}

bool ModemSim::sim_ready() const { return !cfg_.pin_locked && !puk_; }
bool ModemSim::registered() const { return cfg_.registration == 1 || cfg_.registration == 5; }

std::map<int, ModemSim::Message>& ModemSim::store(const std::string& name) { return stores_[name]; }

// ---- input ----

void ModemSim::feed(std::string_view bytes) {
  std::lock_guard lk(mu_);
  for (char c : bytes) {
    if (in_payload_) {
      if (c == 0x1A) {
        in_payload_ = false;
        handle_payload(payload_);
        payload_.clear();
      } else if (c == 0x1B) {
        in_payload_ = false;
        payload_.clear();
        ok();
      } else {
        payload_.push_back(c);
      }
      continue;
    }
    if (c == '\r') {
      if (cfg_.echo) out_ += line_ + "\r";
      auto line = std::move(line_);
      line_.clear();
      handle_line(line);
    } else if (c == '\n') {
      continue;
    } else if (line_.size() < 4096) {
      line_.push_back(c);
    }
  }
}

void ModemSim::handle_line(const std::string& raw) {
  auto line = std::string(trim(raw));
  if (line.empty()) return;
  if (call_.state == SimCallState::dialing) {
    // Any character aborts a dial in progress.
    end_call();
    reply("NO CARRIER");
    return;
  }
  if (line.size() < 2 || upper(line.substr(0, 2)) != "AT") return;
  auto body = line.substr(2);
  if (body.empty()) return ok();

  if (body[0] == '+' || body[0] == '*') {
    auto stop = body.find_first_of("=?");
    auto name = upper(body.substr(0, stop));
    std::string kind = "execute", args;
    if (stop != std::string::npos) {
      auto rest = body.substr(stop);
      if (rest == "=?") {
        kind = "test";
      } else if (rest == "?") {
        kind = "read";
      } else if (rest[0] == '=') {
        kind = "set";
        args = rest.substr(1);
      } else {
        return error();
      }
    }
    if (!cfg_.capabilities.count(name)) return error();
    if (kSimCommands.count(name) && !sim_ready()) {
      if (kSmsCommands.count(name)) return cms(puk_ ? 316 : 311);
      return cme(puk_ ? 12 : 11);
    }
    return cmd_extended(name, kind, args);
  }

  auto verb = static_cast<char>(std::toupper(static_cast<unsigned char>(body[0])));
  auto rest = body.substr(1);
  std::string name(1, verb);
  if (!cfg_.capabilities.count(name)) return error();
  switch (verb) {
    case 'E':
      if (rest.empty() || rest == "0") {
        cfg_.echo = false;
      } else if (rest == "1") {
        cfg_.echo = true;
      } else {
        return error();
      }
      return ok();
    case 'A':
      if (!rest.empty()) return error();
      if (call_.state != SimCallState::ringing) return reply("NO CARRIER");
      call_.state = SimCallState::active;
      ++generation_;
      return ok();
    case 'H':
      if (!rest.empty() && rest != "0") return error();
      end_call();
      return ok();
    case 'D':
      if (!sim_ready()) return cme(puk_ ? 12 : 11);
      return cmd_dial(rest);
    default: return error();
  }
}

void ModemSim::cmd_dial(const std::string& rest) {
  if (call_.state != SimCallState::none) return cme(3);
  if (rest.empty() || rest.back() != ';') return reply("NO CARRIER");  // data calls are not offered
  auto target = rest.substr(0, rest.size() - 1);
  std::string number;
  if (!target.empty() && target[0] == '>') {
    auto idx = parse_int(target.substr(1));
    auto& pb = phonebooks_[pb_store_];
    auto it = idx ? pb.find(static_cast<int>(*idx)) : pb.end();
    if (it == pb.end()) return cme(21);
    number = it->second.number;
  } else {
    number = target;
    auto digits = number.starts_with("+") ? number.substr(1) : number;
    if (digits.empty() || digits.find_first_not_of("0123456789*#") != std::string::npos) return cme(3);
  }
  if (!registered()) return reply("NO CARRIER");
  call_ = Call{SimCallState::dialing, number, "VOICE", clock_->now() + cfg_.dial_delay, 0};
}

void ModemSim::cmd_extended(const std::string& name, const std::string& kind, const std::string& args) {
  auto p = split_at_params(args);
  auto flag = [&](int& target) {
    if (kind == "set") {
      auto v = as_int(p, 0);
      if (!v) return error();
      target = *v;
      return ok();
    }
    if (kind == "read") {
      reply(name + ": " + std::to_string(target));
      return ok();
    }
    if (kind == "test") {
      reply(name + ": (0,1)");
      return ok();
    }
    return error();
  };

  if (name == "+CMEE") return flag(cmee_);
  if (name == "+CRC") return flag(crc_);
  if (name == "+CLIP") {
    if (kind == "read") {
      reply("+CLIP: " + std::to_string(clip_) + ",1");
      return ok();
    }
    return flag(clip_);
  }
  if (name == "+CMGF") return flag(cmgf_);
  if (name == "+CSTA") return flag(csta_);
  if (name == "+CNMI") {
    if (kind == "set") {
      cnmi_mode_ = as_int(p, 0).value_or(0);
      cnmi_mt_ = as_int(p, 1).value_or(0);
      return ok();
    }
    if (kind == "read") {
      reply("+CNMI: " + std::to_string(cnmi_mode_) + "," + std::to_string(cnmi_mt_) + ",0,0,0");
      return ok();
    }
    if (kind == "test") reply("+CNMI: (0-2),(0-1),(0),(0),(0)");
    return ok();
  }
  if (name == "+CPIN") {
    if (kind == "read") {
      reply(std::string("+CPIN: ") + (puk_ ? "SIM PUK" : cfg_.pin_locked ? "SIM PIN" : "READY"));
      return ok();
    }
    if (kind == "test") return ok();
    if (kind != "set" || p.empty()) return cme(50);
    if (puk_) return cme(12);
    if (!cfg_.pin_locked) return ok();
    if (p[0] == cfg_.pin) {
      cfg_.pin_locked = false;
      attempts_left_ = 3;
      return ok();
    }
    if (--attempts_left_ <= 0) puk_ = true;  // PUK entry is not offered: the card stays locked
    return cme(16);
  }
  if (name == "+CGMI" || name == "+CGMM") {
    if (kind == "test") return ok();
    if (kind != "execute") return error();
    reply(name == "+CGMI" ? cfg_.manufacturer : cfg_.model);
    return ok();
  }
  if (name == "+CSQ") {
    if (kind == "test") {
      reply("+CSQ: (0-31,99),(0-7,99)");
      return ok();
    }
    if (kind != "execute") return error();
    reply("+CSQ: " + std::to_string(cfg_.signal_n) + "," + std::to_string(cfg_.ber));
    return ok();
  }
  if (name == "+CREG") {
    if (kind == "read") {
      reply("+CREG: " + std::to_string(creg_n_) + "," + std::to_string(cfg_.registration));
      return ok();
    }
    if (kind == "test") {
      reply("+CREG: (0-1)");
      return ok();
    }
    return flag(creg_n_);
  }
  if (name == "+CLAC") {
    if (kind != "execute") return kind == "test" ? ok() : error();
    for (const auto& c : cfg_.capabilities) reply(c);
    return ok();
  }
  if (name == "+CHUP") {
    if (kind == "test") return ok();
    if (kind != "execute") return error();
    end_call();
    return ok();
  }
  if (name == "+CMGS") {
    if (kind == "test") return ok();
    if (kind != "set" || p.empty()) return cms(304);
    if (!registered()) return cms(331);
    if (cmgf_ == 0) {
      auto n = as_int(p, 0);
      if (!n || *n <= 0 || *n > 175) return cms(304);
    }
    payload_arg_ = p[0];
    in_payload_ = true;
    out_ += "\r\n> ";
    return;
  }
  if (name == "+CMGR") {
    if (kind == "test") return ok();
    if (kind != "set") return cms(304);
    return cmd_cmgr(args);
  }
  if (name == "+CMGL") {
    if (kind == "test") {
      reply(cmgf_ ? "+CMGL: (\"REC UNREAD\",\"REC READ\",\"STO UNSENT\",\"STO SENT\",\"ALL\")" : "+CMGL: (0-4)");
      return ok();
    }
    if (kind != "set" && kind != "execute") return cms(304);
    return cmd_cmgl(args);
  }
  if (name == "+CMGD") {
    if (kind == "test") {
      reply("+CMGD: (1-" + std::to_string(cfg_.sms_capacity) + "),(0-4)");
      return ok();
    }
    auto idx = as_int(p, 0);
    if (kind != "set" || !idx) return cms(304);
    if (*idx < 1 || *idx > static_cast<int>(cfg_.sms_capacity)) return cms(321);
    store(read_store_).erase(*idx);
    return ok();
  }
  if (name == "+CPMS") {
    auto counts = [&] {
      std::string s;
      for (int i = 0; i < 3; ++i) {
        if (i) s += ",";
        s += std::to_string(store(read_store_).size()) + "," + std::to_string(cfg_.sms_capacity);
      }
      return s;
    };
    if (kind == "test") {
      reply("+CPMS: (\"SM\",\"ME\"),(\"SM\",\"ME\"),(\"SM\",\"ME\")");
      return ok();
    }
    if (kind == "read") {
      reply("+CPMS: \"" + read_store_ + "\"," + counts());
      return ok();
    }
    if (kind != "set" || p.empty()) return cms(304);
    for (const auto& s : p) {
      if (s != "SM" && s != "ME") return cms(302);
    }
    read_store_ = p[0];
    reply("+CPMS: " + counts());
    return ok();
  }
  if (name == "+CPBS") {
    if (kind == "test") {
      reply("+CPBS: (\"SM\",\"ME\")");
      return ok();
    }
    if (kind == "read") {
      reply("+CPBS: \"" + pb_store_ + "\"," + std::to_string(phonebooks_[pb_store_].size()) + "," +
            std::to_string(cfg_.phonebook_capacity));
      return ok();
    }
    if (kind != "set" || p.empty() || (p[0] != "SM" && p[0] != "ME")) return cme(3);
    pb_store_ = p[0];
    return ok();
  }
  if (name == "+CPBR") return cmd_cpbr(kind, args);
  if (name == "+CPBW") {
    if (kind == "test") {
      reply("+CPBW: (1-" + std::to_string(cfg_.phonebook_capacity) + ")," + std::to_string(cfg_.phonebook_number_length) +
            ",(129,145)," + std::to_string(cfg_.phonebook_text_length));
      return ok();
    }
    if (kind != "set") return cme(50);
    return cmd_cpbw(args);
  }
  if (name == "+CPBF") {
    if (kind == "test") {
      reply("+CPBF: " + std::to_string(cfg_.phonebook_number_length) + "," + std::to_string(cfg_.phonebook_text_length));
      return ok();
    }
    if (kind != "set" || p.empty()) return cme(50);
    auto prefix = upper(p[0]);
    for (const auto& [idx, e] : phonebooks_[pb_store_]) {
      if (upper(e.text).starts_with(prefix)) reply(pb_line("+CPBF", idx, e));
    }
    return ok();
  }
  if (name == "+CSIM") {
    if (kind == "test") return ok();
    auto len = as_int(p, 0);
    if (kind != "set" || p.size() < 2 || !len || *len != static_cast<int>(p[1].size()) || p[1].size() % 2) {
      return cme(50);
    }
    auto it = apdu_.find(upper(p[1]));
    std::string resp = it == apdu_.end() ? "6D00" : it->second;
    reply("+CSIM: " + std::to_string(resp.size()) + ",\"" + resp + "\"");
    return ok();
  }
  if (name == "+CRSM") {
    if (kind == "test") return ok();
    if (kind != "set" || p.empty()) return cme(50);
    reply("+CRSM: 106,130");  // file not found: no elementary files are modelled
    return ok();
  }
  error();
}

void ModemSim::handle_payload(const std::string& body) {
  SentSms s;
  s.message_ref = next_mr_ = (next_mr_ + 1) & 0xFF;
  if (cmgf_ == 1) {
    s.destination = payload_arg_;
    s.text = body;
    s.alphabet = "text";
  } else {
    auto hex = std::string(trim(body));
    try {
      auto view = oracle::decode_submit(hex);
      if (view.tpdu_len != std::stoi(payload_arg_)) return cms(304);
      s.pdu = upper(hex);
      s.tpdu_len = view.tpdu_len;
      s.destination = view.destination;
      s.text = view.text;
      s.alphabet = view.alphabet;
      s.concat = view.concat;
    } catch (const std::exception&) {
      return cms(304);
    }
  }
  sent_.push_back(s);
  reply("+CMGS: " + std::to_string(s.message_ref));
  ok();
}

std::string ModemSim::cmgl_stat(int stat) const {
  if (cmgf_ == 0) return std::to_string(stat);
  static const char* kNames[] = {"\"REC UNREAD\"", "\"REC READ\"", "\"STO UNSENT\"", "\"STO SENT\""};
  return kNames[stat & 3];
}

void ModemSim::cmd_cmgr(const std::string& args) {
  auto idx = as_int(split_at_params(args), 0);
  if (!idx) return cms(304);
  auto& st = store(read_store_);
  auto it = st.find(*idx);
  if (it == st.end()) return cms(321);
  auto& m = it->second;
  if (cmgf_ == 0) {
    reply("+CMGR: " + std::to_string(m.stat) + ",," + std::to_string(tpdu_length(m.pdu)));
    reply(m.pdu);
  } else {
    reply("+CMGR: " + cmgl_stat(m.stat) + ",\"" + m.peer + "\",,\"" + m.scts + "\"");
    reply(m.text);
  }
  if (m.stat == 0) m.stat = 1;
  ok();
}

void ModemSim::cmd_cmgl(const std::string& args) {
  auto p = split_at_params(args);
  int filter = 4;
  if (cmgf_ == 0) {
    if (!p.empty()) {
      auto v = as_int(p, 0);
      if (!v || *v < 0 || *v > 4) return cms(304);
      filter = *v;
    }
  } else if (!p.empty()) {
    static const std::map<std::string, int> kNames = {
        {"REC UNREAD", 0}, {"REC READ", 1}, {"STO UNSENT", 2}, {"STO SENT", 3}, {"ALL", 4}};
    auto it = kNames.find(p[0]);
    if (it == kNames.end()) return cms(304);
    filter = it->second;
  }
  for (auto& [idx, m] : store(read_store_)) {
    if (filter != 4 && m.stat != filter) continue;
    if (cmgf_ == 0) {
      reply("+CMGL: " + std::to_string(idx) + "," + std::to_string(m.stat) + ",," + std::to_string(tpdu_length(m.pdu)));
      reply(m.pdu);
    } else {
      reply("+CMGL: " + std::to_string(idx) + "," + cmgl_stat(m.stat) + ",\"" + m.peer + "\",,\"" + m.scts + "\"");
      reply(m.text);
    }
    if (m.stat == 0) m.stat = 1;
  }
  ok();
}

std::string ModemSim::pb_line(const std::string& prefix, int index, const Entry& e) const {
  return prefix + ": " + std::to_string(index) + ",\"" + e.number + "\"," + std::to_string(e.type) + ",\"" + e.text + "\"";
}

void ModemSim::cmd_cpbr(const std::string& kind, const std::string& args) {
  if (kind == "test") {
    reply("+CPBR: (1-" + std::to_string(cfg_.phonebook_capacity) + ")," + std::to_string(cfg_.phonebook_number_length) +
          "," + std::to_string(cfg_.phonebook_text_length));
    return ok();
  }
  auto p = split_at_params(args);
  auto first = as_int(p, 0);
  if (kind != "set" || !first) return cme(50);
  int last = as_int(p, 1).value_or(*first);
  if (*first < 1 || last < *first || last > static_cast<int>(cfg_.phonebook_capacity)) return cme(21);
  for (const auto& [idx, e] : phonebooks_[pb_store_]) {
    if (idx >= *first && idx <= last) reply(pb_line("+CPBR", idx, e));
  }
  ok();
}

void ModemSim::cmd_cpbw(const std::string& args) {
  auto p = split_at_params(args);
  auto& pb = phonebooks_[pb_store_];
  const int cap = static_cast<int>(cfg_.phonebook_capacity);
  std::optional<int> index;
  if (!p.empty() && !trim(p[0]).empty()) {
    index = as_int(p, 0);
    if (!index || *index < 1 || *index > cap) return cme(21);
  }
  if (p.size() < 2) {
    if (!index) return cme(50);
    pb.erase(*index);
    return ok();
  }
  Entry e{p[1], as_int(p, 2).value_or(p[1].starts_with("+") ? 145 : 129), p.size() > 3 ? p[3] : ""};
  if (static_cast<int>(code_points(e.text)) > cfg_.phonebook_text_length) return cme(24);
  if (static_cast<int>(e.number.size()) > cfg_.phonebook_number_length) return cme(26);
  if (!index) {
    for (int i = 1; i <= cap; ++i) {
      if (!pb.count(i)) {
        index = i;
        break;
      }
    }
    if (!index) return cme(20);
  }
  pb[*index] = e;
  ok();
}

void ModemSim::end_call() {
  call_ = Call{};
}

// ---- time ----

void ModemSim::poll() {
  std::lock_guard lk(mu_);
  auto now = clock_->now();
  if (call_.state == SimCallState::dialing && now >= call_.due) {
    const auto& outcome = cfg_.dial_outcome;
    if (outcome == "ok") {
      call_.state = SimCallState::active;
      ++generation_;
      ok();
    } else {
      end_call();
      reply(outcome == "busy" ? "BUSY" : outcome == "no_answer" ? "NO ANSWER" : "NO CARRIER");
    }
  }
  while (call_.state == SimCallState::ringing && now >= call_.due) {
    reply(crc_ ? "+CRING: " + call_.type : "RING");
    if (++call_.rings == 1 && clip_) {
      reply("+CLIP: \"" + call_.peer + "\"," + (call_.peer.starts_with("+") ? "145" : "129"));
    }
    call_.due += cfg_.ring_interval;
  }
}

// ---- control plane ----

ModemSim::InjectResult ModemSim::inject_sms(const oracle::DeliverSpec& in, const std::string& store_name) {
  auto spec = in;
  if (cfg_.sms_time) {
    spec.year = cfg_.sms_time->year;
    spec.month = cfg_.sms_time->month;
    spec.day = cfg_.sms_time->day;
    spec.hour = cfg_.sms_time->hour;
    spec.minute = cfg_.sms_time->minute;
    spec.second = cfg_.sms_time->second;
    spec.tz_quarters = cfg_.sms_time->tz_quarters;
  } else {
    auto t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    spec.year = tm.tm_year + 1900;
    spec.month = tm.tm_mon + 1;
    spec.day = tm.tm_mday;
    spec.hour = tm.tm_hour;
    spec.minute = tm.tm_min;
    spec.second = tm.tm_sec;
    spec.tz_quarters = 0;
  }
  std::string pdu;
  try {
    pdu = oracle::encode_deliver(spec);
  } catch (const std::exception& e) {
    return {std::nullopt, e.what()};
  }
  auto r = inject_sms_pdu(pdu, store_name);
  if (r.index) {
    std::lock_guard lk(mu_);
    auto& m = stores_[store_name][*r.index];
    m.peer = spec.originator;
    m.text = spec.text;
    m.scts = two(spec.year % 100) + "/" + two(spec.month) + "/" + two(spec.day) + "," + two(spec.hour) + ":" +
             two(spec.minute) + ":" + two(spec.second) + (spec.tz_quarters < 0 ? "-" : "+") +
             two(std::abs(spec.tz_quarters));
  }
  return r;
}

ModemSim::InjectResult ModemSim::inject_sms_pdu(const std::string& pdu_hex, const std::string& store_name) {
  std::lock_guard lk(mu_);
  if (!stores_.count(store_name)) return {std::nullopt, "unknown store " + store_name};
  if (pdu_hex.empty() || pdu_hex.size() % 2 || pdu_hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    return {std::nullopt, "pdu is not hex"};
  }
  auto& st = stores_[store_name];
  for (int i = 1; i <= static_cast<int>(cfg_.sms_capacity); ++i) {
    if (st.count(i)) continue;
    st[i] = Message{upper(pdu_hex), 0, "", "", ""};
    if (cnmi_mt_ >= 1) reply("+CMTI: \"" + store_name + "\"," + std::to_string(i));
    return {i, ""};
  }
  return {std::nullopt, "store full"};
}

std::string ModemSim::inject_call(const std::string& from, const std::string& type) {
  std::lock_guard lk(mu_);
  if (call_.state != SimCallState::none) return "busy";
  call_ = Call{SimCallState::ringing, from, upper(type), clock_->now(), 0};
  auto now = clock_->now();
  // First ring goes out immediately.
  reply(crc_ ? "+CRING: " + call_.type : "RING");
  call_.rings = 1;
  if (clip_) reply("+CLIP: \"" + from + "\"," + (from.starts_with("+") ? "145" : "129"));
  call_.due = now + cfg_.ring_interval;
  return "";
}

void ModemSim::remote_hangup() {
  std::lock_guard lk(mu_);
  if (call_.state == SimCallState::none) return;
  end_call();
  reply("NO CARRIER");
}

void ModemSim::set_signal(int n, int ber) {
  std::lock_guard lk(mu_);
  cfg_.signal_n = n;
  cfg_.ber = ber;
}

void ModemSim::set_registration(int stat) {
  std::lock_guard lk(mu_);
  bool changed = cfg_.registration != stat;
  cfg_.registration = stat;
  if (changed && creg_n_ == 1) reply("+CREG: " + std::to_string(stat));
}

void ModemSim::set_capabilities(std::set<std::string> caps) {
  std::lock_guard lk(mu_);
  cfg_.capabilities = std::move(caps);
}

std::set<std::string> ModemSim::capabilities() const {
  std::lock_guard lk(mu_);
  return cfg_.capabilities;
}

void ModemSim::script_apdu(std::map<std::string, std::string> table) {
  std::lock_guard lk(mu_);
  apdu_.clear();
  for (auto& [k, v] : table) apdu_[upper(k)] = upper(v);
}

void ModemSim::set_dial(std::string outcome, std::chrono::milliseconds delay) {
  std::lock_guard lk(mu_);
  cfg_.dial_outcome = std::move(outcome);
  cfg_.dial_delay = delay;
}

void ModemSim::set_tone(int hz, int ms) {
  std::lock_guard lk(mu_);
  cfg_.tone_hz = hz;
  cfg_.tone_ms = ms;
}

void ModemSim::set_pin(bool locked, const std::string& code) {
  std::lock_guard lk(mu_);
  cfg_.pin_locked = locked;
  cfg_.pin = code;
  puk_ = false;
  attempts_left_ = 3;
}

json ModemSim::state() const {
  std::lock_guard lk(mu_);
  static const char* kCall[] = {"none", "dialing", "ringing", "active"};
  json stores = json::object();
  for (const auto& [name, st] : stores_) {
    json list = json::array();
    for (const auto& [idx, m] : st) list.push_back({{"index", idx}, {"stat", m.stat}, {"pdu", m.pdu}});
    stores[name] = list;
  }
  json pbs = json::object();
  for (const auto& [name, pb] : phonebooks_) {
    json list = json::array();
    for (const auto& [idx, e] : pb) list.push_back({{"index", idx}, {"number", e.number}, {"type", e.type}, {"text", e.text}});
    pbs[name] = list;
  }
  return {
      {"pin", {{"locked", cfg_.pin_locked}, {"puk", puk_}, {"attempts_left", attempts_left_}}},
      {"registration", cfg_.registration},
      {"signal", {{"n", cfg_.signal_n}, {"ber", cfg_.ber}}},
      {"echo", cfg_.echo},
      {"cmgf", cmgf_},
      {"cnmi", {cnmi_mode_, cnmi_mt_}},
      {"crc", crc_},
      {"clip", clip_},
      {"call", {{"state", kCall[static_cast<int>(call_.state)]}, {"peer", call_.peer}, {"type", call_.type}, {"rings", call_.rings}}},
      {"capabilities", cfg_.capabilities},
      {"sms", stores},
      {"phonebook", pbs},
      {"sent", sent_.size()},
      {"audio", {{"inbound_bytes", audio_in_bytes_}, {"inbound_frames", audio_in_bytes_ / 320}, {"outbound_frames", audio_out_frames_}}},
  };
}

std::vector<SentSms> ModemSim::sent() const {
  std::lock_guard lk(mu_);
  return sent_;
}

SimCallState ModemSim::call_state() const {
  std::lock_guard lk(mu_);
  return call_.state;
}

std::uint64_t ModemSim::active_generation() const {
  std::lock_guard lk(mu_);
  return call_.state == SimCallState::active ? generation_ : 0;
}

std::pair<int, int> ModemSim::tone() const {
  std::lock_guard lk(mu_);
  return {cfg_.tone_hz, cfg_.tone_ms};
}

void ModemSim::count_inbound_audio(std::size_t bytes) {
  std::lock_guard lk(mu_);
  audio_in_bytes_ += bytes;
}

void ModemSim::count_outbound_frame() {
  std::lock_guard lk(mu_);
  ++audio_out_frames_;
}

}  // namespace cellgate::sim
