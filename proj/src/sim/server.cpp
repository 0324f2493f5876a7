#include "cellgate/sim/server.hpp"

#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "cellgate/error.hpp"
#include "httplib.h"

namespace cellgate::sim {

using namespace std::chrono_literals;
using nlohmann::json;

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  if (!j.is_object()) fail(Errc::invalid_argument, "sim config must be an object");
  try {
    c.manufacturer = j.value("manufacturer", c.manufacturer);
    c.model = j.value("model", c.model);
    c.pin = j.value("pin", c.pin);
    c.pin_locked = j.value("pin_locked", c.pin_locked);
    c.signal_n = j.value("signal", c.signal_n);
    c.ber = j.value("ber", c.ber);
    c.registration = j.value("registration", c.registration);
    c.sms_capacity = j.value("sms_capacity", c.sms_capacity);
    c.phonebook_capacity = j.value("phonebook_capacity", c.phonebook_capacity);
    if (j.contains("capabilities")) c.capabilities = j.at("capabilities").get<std::set<std::string>>();
    for (const auto& r : j.value("remove_capabilities", std::vector<std::string>{})) c.capabilities.erase(r);
    c.dial_delay = std::chrono::milliseconds(j.value("dial_delay_ms", static_cast<int>(c.dial_delay.count())));
    c.dial_outcome = j.value("dial_outcome", c.dial_outcome);
    c.ring_interval = std::chrono::milliseconds(j.value("ring_interval_ms", static_cast<int>(c.ring_interval.count())));
    c.tone_hz = j.value("tone_hz", c.tone_hz);
    c.tone_ms = j.value("tone_ms", c.tone_ms);
    c.echo = j.value("echo", c.echo);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("sim config: ") + e.what());
  }
  return c;
}

SimServerOptions SimServerOptions::from_base_port(const std::string& host, std::uint16_t port) {
  SimServerOptions o;
  o.host = host;
  o.at_port = port;
  o.ctl_port = static_cast<std::uint16_t>(port + 1);
  o.audio_port = static_cast<std::uint16_t>(port + 2);
  return o;
}

SimServer::SimServer(std::shared_ptr<ModemSim> sim, SimServerOptions options)
    : sim_(std::move(sim)), options_(std::move(options)) {}

SimServer::~SimServer() { stop(); }

std::string SimServer::at_transport() const { return "tcp:" + options_.host + ":" + std::to_string(at_port_); }
std::string SimServer::audio_transport() const { return "tcp:" + options_.host + ":" + std::to_string(audio_port_); }
std::string SimServer::ctl_url() const { return "http://" + options_.host + ":" + std::to_string(ctl_port_); }

void SimServer::start() {
  if (started_) return;
  started_ = true;
  at_listener_ = std::make_unique<TcpListener>(options_.host, options_.at_port);
  at_port_ = at_listener_->port();
  audio_listener_ = std::make_unique<TcpListener>(options_.host, options_.audio_port);
  audio_port_ = audio_listener_->port();

  ctl_ = std::make_unique<httplib::Server>();
  install_routes();
  if (options_.ctl_port == 0) {
    int p = ctl_->bind_to_any_port(options_.host);
    if (p <= 0) fail(Errc::transport_closed, "control plane could not bind");
    ctl_port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!ctl_->bind_to_port(options_.host, options_.ctl_port)) {
      fail(Errc::transport_closed, "control plane could not bind port " + std::to_string(options_.ctl_port));
    }
    ctl_port_ = options_.ctl_port;
  }

  std::lock_guard lk(threads_mu_);
  threads_.emplace_back([this] { ctl_->listen_after_bind(); });
  threads_.emplace_back([this] {
    while (!stop_) {
      if (auto ch = at_listener_->accept(100ms)) attach(std::move(ch));
    }
  });
  threads_.emplace_back([this] {
    while (!stop_) {
      sim_->poll();
      flush();
      std::this_thread::sleep_for(10ms);
    }
  });
  threads_.emplace_back([this] {
    while (!stop_) {
      auto ch = audio_listener_->accept(100ms);
      if (!ch) continue;
      std::shared_ptr<ByteChannel> shared(std::move(ch));
      std::lock_guard lk(threads_mu_);
      threads_.emplace_back([this, shared] { audio_session(shared); });
    }
  });
  if (options_.mem_id) {
    MemoryHub::instance().listen(*options_.mem_id, [this](std::unique_ptr<ByteChannel> ch) { attach(std::move(ch)); });
  }
  spdlog::info("modem sim: AT {}  control {}  audio {}", at_port_, ctl_port_, audio_port_);
}

void SimServer::stop() {
  if (!started_ || stop_.exchange(true)) return;
  if (options_.mem_id) MemoryHub::instance().unlisten(*options_.mem_id);
  ctl_->stop();
  {
    std::lock_guard lk(conn_mu_);
    if (conn_) conn_->close();
    for (auto& a : audio_conns_) a->close();
  }
  at_listener_->close();
  audio_listener_->close();
  std::vector<std::thread> threads;
  {
    std::lock_guard lk(threads_mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

void SimServer::attach(std::unique_ptr<ByteChannel> ch) {
  std::shared_ptr<ByteChannel> shared(std::move(ch));
  {
    std::lock_guard lk(conn_mu_);
    if (conn_) conn_->close();
    conn_ = shared;
  }
  std::lock_guard lk(threads_mu_);
  if (stop_) return;
  threads_.emplace_back([this, shared] { at_reader(shared); });
}

void SimServer::flush() {
  std::lock_guard lk(conn_mu_);
  if (!conn_) return;
  auto out = sim_->take_output();
  if (out.empty()) return;
  try {
    conn_->write(out);
  } catch (const Error& e) {
    spdlog::debug("modem sim: AT write failed: {}", e.what());
  }
}

void SimServer::at_reader(std::shared_ptr<ByteChannel> ch) {
  std::array<char, 1024> buf{};
  while (!stop_) {
    std::size_t n = 0;
    try {
      n = ch->read(buf, 100ms);
    } catch (const Error&) {
      break;
    }
    if (n == 0) continue;
    sim_->feed(std::string_view(buf.data(), n));
    flush();
  }
  std::lock_guard lk(conn_mu_);
  if (conn_ == ch) conn_.reset();
}

void SimServer::audio_session(std::shared_ptr<ByteChannel> ch) {
  {
    std::lock_guard lk(conn_mu_);
    audio_conns_.push_back(ch);
  }
  std::uint64_t gen = 0;
  auto wait_until = std::chrono::steady_clock::now() + 5s;
  while (!stop_ && (gen = sim_->active_generation()) == 0 && std::chrono::steady_clock::now() < wait_until) {
    std::this_thread::sleep_for(10ms);
  }
  auto [hz, ms] = sim_->tone();
  const int frames = ms / 20;
  const auto start = std::chrono::steady_clock::now();
  int sent = 0;
  std::size_t sample = 0;
  std::array<char, 2048> in{};
  while (!stop_ && gen != 0 && sim_->active_generation() == gen) {
    auto now = std::chrono::steady_clock::now();
    if (sent < frames && now >= start + sent * 20ms) {
      std::string frame(320, '\0');
      for (int i = 0; i < 160; ++i, ++sample) {
        auto v = static_cast<std::int16_t>(8000.0 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(sample) / 8000.0));
        frame[2 * i] = static_cast<char>(v & 0xFF);
        frame[2 * i + 1] = static_cast<char>((v >> 8) & 0xFF);
      }
      try {
        ch->write(frame);
      } catch (const Error&) {
        break;
      }
      ++sent;
      sim_->count_outbound_frame();
      continue;
    }
    auto next = sent < frames ? start + sent * 20ms : now + 10ms;
    auto wait = std::clamp(std::chrono::duration_cast<std::chrono::milliseconds>(next - now), 0ms, 10ms);
    try {
      auto n = ch->read(in, wait);
      if (n) sim_->count_inbound_audio(n);
    } catch (const Error&) {
      break;
    }
  }
  ch->close();
  std::lock_guard lk(conn_mu_);
  std::erase(audio_conns_, ch);
}

void SimServer::install_routes() {
  auto& s = *ctl_;
  auto body = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };
  auto send = [](httplib::Response& res, int status, const json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  };
  auto guarded = [send](auto fn) {
    return [fn, send](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const std::exception& e) {
        send(res, 400, {{"error", e.what()}});
      }
    };
  };

  s.Post("/ctl/sms", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    auto store = j.value("store", std::string("SM"));
    ModemSim::InjectResult r;
    if (j.contains("pdu")) {
      r = sim_->inject_sms_pdu(j.at("pdu").get<std::string>(), store);
    } else {
      oracle::DeliverSpec spec;
      spec.originator = j.at("from").get<std::string>();
      spec.text = j.at("text").get<std::string>();
      spec.alphabet = j.value("alphabet", oracle::fits_gsm7(spec.text) ? std::string("gsm7") : std::string("ucs2"));
      if (j.contains("concat")) {
        auto c = j.at("concat");
        spec.concat = oracle::Concat{c.value("ref", 0), c.value("total", 1), c.value("seq", 1)};
      }
      r = sim_->inject_sms(spec, store);
    }
    if (!r.index) return send(res, r.error == "store full" ? 507 : 400, {{"error", r.error}, {"overflow", r.error == "store full"}});
    send(res, 200, {{"index", *r.index}, {"store", store}});
  }));
  s.Post("/ctl/call", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    auto err = sim_->inject_call(j.value("from", std::string("+33600000000")), j.value("type", std::string("VOICE")));
    if (!err.empty()) return send(res, 409, {{"error", err}});
    send(res, 200, {{"state", "ringing"}});
  }));
  s.Post("/ctl/hangup", guarded([this, send](const httplib::Request&, httplib::Response& res) {
    sim_->remote_hangup();
    send(res, 200, {{"state", "none"}});
  }));
  s.Post("/ctl/signal", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    sim_->set_signal(j.at("n").get<int>(), j.value("ber", 99));
    send(res, 200, json::object());
  }));
  s.Post("/ctl/registration", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    sim_->set_registration(body(req).at("stat").get<int>());
    send(res, 200, json::object());
  }));
  s.Get("/ctl/capabilities", guarded([this, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, {{"capabilities", sim_->capabilities()}});
  }));
  s.Post("/ctl/capabilities", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    auto caps = sim_->capabilities();
    if (j.contains("set")) caps = j.at("set").get<std::set<std::string>>();
    for (const auto& c : j.value("remove", std::vector<std::string>{})) caps.erase(c);
    for (const auto& c : j.value("add", std::vector<std::string>{})) caps.insert(c);
    sim_->set_capabilities(caps);
    send(res, 200, {{"capabilities", caps}});
  }));
  s.Post("/ctl/apdu", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    sim_->script_apdu(body(req).at("table").get<std::map<std::string, std::string>>());
    send(res, 200, json::object());
  }));
  s.Post("/ctl/dial_outcome", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    auto outcome = j.value("outcome", std::string("ok"));
    if (outcome != "ok" && outcome != "busy" && outcome != "no_answer" && outcome != "no_carrier") {
      return send(res, 400, {{"error", "unknown outcome " + outcome}});
    }
    sim_->set_dial(outcome, std::chrono::milliseconds(j.value("delay_ms", 200)));
    send(res, 200, json::object());
  }));
  s.Post("/ctl/tone", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    sim_->set_tone(j.value("hz", 440), j.value("ms", 3000));
    send(res, 200, json::object());
  }));
  s.Post("/ctl/pin", guarded([this, body, send](const httplib::Request& req, httplib::Response& res) {
    auto j = body(req);
    sim_->set_pin(j.value("locked", true), j.value("code", std::string("0000")));
    send(res, 200, json::object());
  }));
  s.Get("/ctl/state", guarded([this, send](const httplib::Request&, httplib::Response& res) { send(res, 200, sim_->state()); }));
  s.Get("/ctl/audio", guarded([this, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, sim_->state().at("audio"));
  }));
  s.Get("/ctl/sent", guarded([this, send](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& m : sim_->sent()) {
      json item = {{"message_ref", m.message_ref}, {"pdu", m.pdu},     {"tpdu_len", m.tpdu_len},
                   {"destination", m.destination}, {"text", m.text}, {"alphabet", m.alphabet}};
      if (m.concat) item["concat"] = {{"ref", m.concat->ref}, {"total", m.concat->total}, {"seq", m.concat->seq}};
      list.push_back(item);
    }
    send(res, 200, list);
  }));
}

}  // namespace cellgate::sim
