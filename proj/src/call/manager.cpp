#include "cellgate/call/manager.hpp"

#include <regex>

#include <spdlog/spdlog.h>

#include "cellgate/call/g711.hpp"
#include "cellgate/call/rtp.hpp"
#include "cellgate/error.hpp"

namespace cellgate::call {

using namespace std::chrono_literals;

std::string_view to_string(CallState s) noexcept {
  switch (s) {
    case CallState::idle: return "idle";
    case CallState::dialing: return "dialing";
    case CallState::ringing: return "ringing";
    case CallState::active: return "active";
    case CallState::terminated: return "terminated";
  }
  return "?";
}

std::string_view to_string(CallDirection d) noexcept {
  return d == CallDirection::outgoing ? "outgoing" : "incoming";
}

std::string_view to_string(EndCause c) noexcept {
  switch (c) {
    case EndCause::none: return "none";
    case EndCause::local_hangup: return "local_hangup";
    case EndCause::remote_hangup: return "remote_hangup";
    case EndCause::rejected: return "rejected";
    case EndCause::busy: return "busy";
    case EndCause::no_answer: return "no_answer";
    case EndCause::no_carrier: return "no_carrier";
    case EndCause::unsupported_bearer: return "unsupported_bearer";
    case EndCause::audio_lost: return "audio_lost";
    case EndCause::error: return "error";
  }
  return "?";
}

bool legal_transition(CallState from, CallState to) noexcept {
  switch (from) {
    case CallState::idle: return to == CallState::dialing || to == CallState::ringing;
    case CallState::dialing:
    case CallState::ringing: return to == CallState::active || to == CallState::terminated;
    case CallState::active: return to == CallState::terminated;
    case CallState::terminated: return false;
  }
  return false;
}

IncomingInfo parse_cring(std::string_view payload) {
  auto params = split_at_params(payload);
  IncomingInfo info;
  if (!params.empty()) info.type = to_upper(trim(params[0]));
  if (params.size() > 1) {
    if (auto v = parse_int(trim(params[1]))) info.priority = static_cast<int>(*v);
  }
  if (params.size() > 2 && !params[2].empty()) info.subaddr = params[2];
  if (params.size() > 3) {
    if (auto v = parse_int(trim(params[3]))) info.satype = static_cast<int>(*v);
  }
  return info;
}

// ---- AudioTap ----

std::optional<Bytes> AudioTap::next(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return closed_ || !from_modem_.empty(); });
  if (from_modem_.empty()) return std::nullopt;
  auto f = std::move(from_modem_.front());
  from_modem_.pop_front();
  return f;
}

void AudioTap::send(Bytes pcm) {
  std::lock_guard lk(mu_);
  if (closed_) return;
  if (to_modem_.size() >= 50) to_modem_.pop_front();
  to_modem_.push_back(std::move(pcm));
}

bool AudioTap::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

void AudioTap::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

void AudioTap::deliver(const Bytes& pcm) {
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    if (from_modem_.size() >= 50) from_modem_.pop_front();
    from_modem_.push_back(pcm);
  }
  cv_.notify_all();
}

std::optional<Bytes> AudioTap::take_outbound() {
  std::lock_guard lk(mu_);
  if (to_modem_.empty()) return std::nullopt;
  auto f = std::move(to_modem_.front());
  to_modem_.pop_front();
  return f;
}

// ---- CallManager ----

struct CallManager::Session {
  CallInfo info;
  std::unique_ptr<UdpSocket> rtp;
  std::unique_ptr<ByteChannel> audio;
  std::mutex audio_write_mu;
  RtpSender sender;
  std::shared_ptr<AudioTap> tap;
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> rtp_sent{0}, rtp_received{0}, from_modem{0}, to_modem{0};
  std::thread up, down;
};

CallManager::CallManager(at::AtEngine& engine, Options options) : engine_(engine), options_(std::move(options)) {}

CallManager::~CallManager() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lk(mu_);
    for (auto& [id, s] : sessions_) {
      s->stop = true;
      if (s->tap) s->tap->close();
      if (s->up.joinable()) threads.push_back(std::move(s->up));
      if (s->down.joinable()) threads.push_back(std::move(s->down));
    }
    for (auto& w : workers_) threads.push_back(std::move(w));
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

void CallManager::set_listener(Listener listener) {
  std::lock_guard lk(mu_);
  listener_ = std::move(listener);
}

std::shared_ptr<CallManager::Session> CallManager::live_locked() const {
  for (const auto& [id, s] : sessions_) {
    if (s->info.state != CallState::terminated) return s;
  }
  return nullptr;
}

std::shared_ptr<CallManager::Session> CallManager::find_locked(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(Errc::not_found, "no call " + id);
  return it->second;
}

std::shared_ptr<CallManager::Session> CallManager::create_locked(CallDirection dir,
                                                                 std::optional<UdpEndpoint> remote) {
  auto s = std::make_shared<Session>();
  s->info.id = "call-" + std::to_string(next_id_++);
  s->info.direction = dir;
  s->info.state = dir == CallDirection::outgoing ? CallState::dialing : CallState::ringing;
  s->info.rtp_remote = std::move(remote);
  s->rtp = std::make_unique<UdpSocket>(options_.rtp_bind, 0);
  s->info.rtp_local = s->rtp->local();
  s->info.ssrc = s->sender.ssrc();
  sessions_.emplace(s->info.id, s);
  return s;
}

CallInfo CallManager::info(const Session& s) const {
  CallInfo i = s.info;
  i.rtp_sent = s.rtp_sent;
  i.rtp_received = s.rtp_received;
  i.frames_from_modem = s.from_modem;
  i.frames_to_modem = s.to_modem;
  return i;
}

void CallManager::emit(EventKind kind, const std::shared_ptr<Session>& s) {
  Listener l;
  CallInfo i;
  {
    std::lock_guard lk(mu_);
    l = listener_;
    i = info(*s);
  }
  if (l) l(kind, i);
}

void CallManager::transition(const std::shared_ptr<Session>& s, CallState to, EndCause cause) {
  {
    std::lock_guard lk(mu_);
    if (!legal_transition(s->info.state, to)) {
      spdlog::debug("call {}: ignoring {} -> {}", s->info.id, to_string(s->info.state), to_string(to));
      return;
    }
    s->info.state = to;
    if (to == CallState::terminated) {
      s->info.cause = cause;
      stop_bridge(*s);
    }
  }
  spdlog::info("call {} -> {}{}", s->info.id, to_string(to),
               to == CallState::terminated ? std::string(" (") + std::string(to_string(cause)) + ")" : "");
  emit(EventKind::call_state, s);
}

void CallManager::stop_bridge(Session& s) {
  s.stop = true;
  if (s.tap) s.tap->close();
}

CallInfo CallManager::dial(const std::string& number, std::optional<UdpEndpoint> rtp_remote) {
  static const std::regex kNumber(R"(^(\+?[0-9*#]{1,20}|>[0-9]{1,4})$)");
  if (!std::regex_match(number, kNumber)) fail(Errc::invalid_number, "not a dialable number: " + number);
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mu_);
    if (auto live = live_locked()) fail(Errc::modem_busy, "call " + live->info.id + " is in progress");
    s = create_locked(CallDirection::outgoing, std::move(rtp_remote));
    s->info.peer = number;
    workers_.emplace_back([this, s, cmd = "D" + number + ";"] { run_dial(s, cmd); });
  }
  emit(EventKind::call_state, s);
  std::lock_guard lk(mu_);
  return info(*s);
}

void CallManager::run_dial(std::shared_ptr<Session> s, std::string command) {
  try {
    auto r = engine_.execute(at::AtCommand::execute(command));
    if (r.ok()) {
      transition(s, CallState::active);
      start_bridge(s);
      return;
    }
    using K = at::FinalResult::Kind;
    EndCause cause = EndCause::error;
    if (r.final.kind == K::busy) cause = EndCause::busy;
    if (r.final.kind == K::no_answer) cause = EndCause::no_answer;
    if (r.final.kind == K::no_carrier) cause = EndCause::no_carrier;
    transition(s, CallState::terminated, cause);
  } catch (const Error& e) {
    spdlog::warn("call {}: dial failed: {}", s->info.id, e.what());
    transition(s, CallState::terminated, EndCause::error);
  }
}

CallInfo CallManager::answer(const std::string& id, std::optional<UdpEndpoint> rtp_remote) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mu_);
    s = find_locked(id);
    if (s->info.state != CallState::ringing) {
      fail(Errc::invalid_state, "call " + id + " is " + std::string(to_string(s->info.state)));
    }
    if (rtp_remote) s->info.rtp_remote = std::move(rtp_remote);
  }
  at::AtResponse r;
  try {
    r = engine_.execute(at::AtCommand::execute("A"));
  } catch (const Error& e) {
    transition(s, CallState::terminated, EndCause::error);
    throw;
  }
  if (!r.ok()) {
    auto cause = r.final.kind == at::FinalResult::Kind::no_carrier ? EndCause::remote_hangup : EndCause::error;
    transition(s, CallState::terminated, cause);
    fail(Errc::invalid_state, "call " + id + " ended before it was answered");
  }
  transition(s, CallState::active);
  start_bridge(s);
  std::lock_guard lk(mu_);
  return info(*s);
}

CallInfo CallManager::hangup(const std::string& id) {
  std::shared_ptr<Session> s;
  CallState state;
  {
    std::lock_guard lk(mu_);
    s = find_locked(id);
    state = s->info.state;
  }
  if (state == CallState::dialing) {
    // ATD still holds the command slot; the queued +CHUP clears whatever it left behind.
    transition(s, CallState::terminated, EndCause::local_hangup);
    std::lock_guard lk(mu_);
    workers_.emplace_back([this] {
      try {
        engine_.execute(at::AtCommand::execute("+CHUP"));
      } catch (const Error& e) {
        spdlog::warn("hangup during dial: {}", e.what());
      }
    });
  } else if (state == CallState::ringing || state == CallState::active) {
    try {
      auto r = engine_.execute(at::AtCommand::execute("+CHUP"));
      if (!r.ok()) spdlog::warn("call {}: +CHUP answered {}", id, r.final.text);
    } catch (const Error& e) {
      spdlog::warn("call {}: +CHUP failed: {}", id, e.what());
    }
    transition(s, CallState::terminated,
               state == CallState::ringing ? EndCause::rejected : EndCause::local_hangup);
  }
  std::thread up, down;
  {
    std::lock_guard lk(mu_);
    if (s->up.joinable() && s->up.get_id() != std::this_thread::get_id()) up = std::move(s->up);
    if (s->down.joinable() && s->down.get_id() != std::this_thread::get_id()) down = std::move(s->down);
  }
  if (up.joinable()) up.join();
  if (down.joinable()) down.join();
  std::lock_guard lk(mu_);
  return info(*s);
}

std::optional<CallInfo> CallManager::get(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return info(*it->second);
}

std::vector<CallInfo> CallManager::list() const {
  std::lock_guard lk(mu_);
  std::vector<CallInfo> out;
  for (const auto& [id, s] : sessions_) out.push_back(info(*s));
  return out;
}

void CallManager::on_urc(const at::Urc& urc) {
  if (urc.prefix == "+CRING" || urc.prefix == "RING") {
    auto in = urc.prefix == "RING" ? IncomingInfo{"VOICE", {}, {}, {}} : parse_cring(urc.payload);
    std::shared_ptr<Session> s;
    {
      std::lock_guard lk(mu_);
      if (auto live = live_locked()) {
        if (live->info.state != CallState::ringing) spdlog::info("ignoring ring during call {}", live->info.id);
        return;
      }
      s = create_locked(CallDirection::incoming, std::nullopt);
      s->info.incoming = in;
    }
    emit(EventKind::incoming_call, s);
    if (in.type != "VOICE") {
      transition(s, CallState::terminated, EndCause::unsupported_bearer);
      try {
        engine_.execute(at::AtCommand::execute("+CHUP"));
      } catch (const Error& e) {
        spdlog::warn("rejecting {} call: {}", in.type, e.what());
      }
    }
    return;
  }
  if (urc.prefix == "+CLIP") {
    auto params = split_at_params(urc.payload);
    if (params.empty() || params[0].empty()) return;
    std::shared_ptr<Session> s;
    {
      std::lock_guard lk(mu_);
      s = live_locked();
      if (!s || s->info.direction != CallDirection::incoming || !s->info.peer.empty()) return;
      s->info.peer = params[0];
    }
    emit(EventKind::call_state, s);
    return;
  }
  EndCause cause;
  if (urc.prefix == "NO CARRIER") {
    cause = EndCause::remote_hangup;
  } else if (urc.prefix == "BUSY") {
    cause = EndCause::busy;
  } else if (urc.prefix == "NO ANSWER") {
    cause = EndCause::no_answer;
  } else {
    return;
  }
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mu_);
    s = live_locked();
  }
  if (s && s->info.state != CallState::dialing) transition(s, CallState::terminated, cause);
}

std::shared_ptr<AudioTap> CallManager::open_tap(const std::string& id) {
  std::lock_guard lk(mu_);
  auto s = find_locked(id);
  if (s->info.state != CallState::active) fail(Errc::invalid_state, "call " + id + " is not active");
  if (s->tap && !s->tap->closed()) fail(Errc::conflict, "call " + id + " already has an audio relay");
  s->tap = std::make_shared<AudioTap>();
  return s->tap;
}

void CallManager::start_bridge(const std::shared_ptr<Session>& s) {
  std::unique_ptr<ByteChannel> audio;
  if (options_.audio) {
    try {
      audio = options_.audio();
    } catch (const Error& e) {
      spdlog::warn("call {}: no modem audio channel: {}", s->info.id, e.what());
    }
  }
  std::lock_guard lk(mu_);
  if (s->info.state != CallState::active) return;
  s->audio = std::move(audio);
  if (s->audio) s->up = std::thread([this, s] { uplink(s); });
  s->down = std::thread([this, s] { downlink(s); });
}

void CallManager::uplink(std::shared_ptr<Session> s) {
  std::string pending;
  std::array<char, 4096> buf{};
  while (!s->stop) {
    std::size_t n = 0;
    try {
      n = s->audio->read(buf, 50ms);
    } catch (const Error&) {
      // The remote side usually reports NO CARRIER right after closing audio.
      auto deadline = std::chrono::steady_clock::now() + options_.audio_eof_grace;
      while (!s->stop && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(10ms);
      if (s->stop) return;
      transition(s, CallState::terminated, EndCause::audio_lost);
      try {
        engine_.execute(at::AtCommand::execute("+CHUP"));
      } catch (const Error&) {
      }
      return;
    }
    pending.append(buf.data(), n);
    while (pending.size() >= static_cast<std::size_t>(kFrameBytes)) {
      Bytes pcm(pending.begin(), pending.begin() + kFrameBytes);
      pending.erase(0, kFrameBytes);
      ++s->from_modem;
      std::optional<UdpEndpoint> remote;
      std::shared_ptr<AudioTap> tap;
      {
        std::lock_guard lk(mu_);
        remote = s->info.rtp_remote;
        tap = s->tap;
      }
      if (tap) tap->deliver(pcm);
      if (!remote) continue;
      auto pkt = s->sender.next(encode_ulaw(pcm), kFrameSamples);
      try {
        s->rtp->send_to(*remote, encode_rtp(pkt));
        ++s->rtp_sent;
      } catch (const Error& e) {
        spdlog::debug("call {}: rtp send: {}", s->info.id, e.what());
      }
    }
  }
}

void CallManager::downlink(std::shared_ptr<Session> s) {
  JitterBuffer jitter(options_.jitter_depth);
  Bytes buf(2048);
  auto to_modem = [&](const Bytes& pcm) {
    ++s->to_modem;
    if (!s->audio) return;
    std::lock_guard lk(s->audio_write_mu);
    try {
      s->audio->write(std::string_view(reinterpret_cast<const char*>(pcm.data()), pcm.size()));
    } catch (const Error&) {
      // uplink notices the closed channel
    }
  };
  while (!s->stop) {
    UdpEndpoint from;
    std::size_t n = 0;
    try {
      n = s->rtp->recv_from(buf, 20ms, &from);
    } catch (const Error& e) {
      spdlog::debug("call {}: rtp recv: {}", s->info.id, e.what());
      std::this_thread::sleep_for(20ms);
    }
    if (n > 0) {
      auto pkt = parse_rtp(std::span(buf.data(), n));
      if (pkt && pkt->payload_type == kPayloadPcmu) {
        ++s->rtp_received;
        {
          std::lock_guard lk(mu_);
          if (!s->info.rtp_remote) s->info.rtp_remote = from;
        }
        jitter.push(pkt->seq, std::move(pkt->payload));
        while (auto f = jitter.pop()) to_modem(decode_ulaw(*f));
      }
    } else {
      while (auto f = jitter.drain()) to_modem(decode_ulaw(*f));
    }
    std::shared_ptr<AudioTap> tap;
    {
      std::lock_guard lk(mu_);
      tap = s->tap;
    }
    if (tap) {
      while (auto f = tap->take_outbound()) to_modem(*f);
    }
  }
}

}  // namespace cellgate::call
