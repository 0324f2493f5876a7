#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cellgate/at/engine.hpp"
#include "cellgate/transport.hpp"
#include "cellgate/util.hpp"

namespace cellgate::call {

enum class CallState { idle, dialing, ringing, active, terminated };
enum class CallDirection { outgoing, incoming };
enum class EndCause {
  none,
  local_hangup,
  remote_hangup,
  rejected,
  busy,
  no_answer,
  no_carrier,
  unsupported_bearer,
  audio_lost,
  error,
};

std::string_view to_string(CallState s) noexcept;
std::string_view to_string(CallDirection d) noexcept;
std::string_view to_string(EndCause c) noexcept;

// The declared call graph: idle->dialing->{active,terminated}, idle->ringing->{active,terminated},
// active->terminated.
bool legal_transition(CallState from, CallState to) noexcept;

struct IncomingInfo {
  std::string type;  // VOICE, FAX, ...
  std::optional<int> priority;
  std::optional<std::string> subaddr;
  std::optional<int> satype;
};

// "+CRING: VOICE,1" payload -> {VOICE, priority 1}.
IncomingInfo parse_cring(std::string_view payload);

struct CallInfo {
  std::string id;
  CallDirection direction = CallDirection::outgoing;
  std::string peer;  // empty until known
  CallState state = CallState::idle;
  EndCause cause = EndCause::none;
  std::optional<IncomingInfo> incoming;
  UdpEndpoint rtp_local;
  std::optional<UdpEndpoint> rtp_remote;
  std::uint32_t ssrc = 0;
  std::uint64_t rtp_sent = 0;
  std::uint64_t rtp_received = 0;
  std::uint64_t frames_from_modem = 0;
  std::uint64_t frames_to_modem = 0;
};

// Console relay of one call's audio: PCM frames out of the modem, PCM frames into it.
class AudioTap {
 public:
  std::optional<Bytes> next(std::chrono::milliseconds timeout);
  void send(Bytes pcm);
  bool closed() const;
  void close();

 private:
  friend class CallManager;
  void deliver(const Bytes& pcm);
  std::optional<Bytes> take_outbound();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> from_modem_;
  std::deque<Bytes> to_modem_;
  bool closed_ = false;
};

class CallManager {
 public:
  using AudioConnector = std::function<std::unique_ptr<ByteChannel>()>;
  enum class EventKind { incoming_call, call_state };
  using Listener = std::function<void(EventKind, const CallInfo&)>;

  struct Options {
    std::string rtp_bind = "127.0.0.1";
    AudioConnector audio;  // empty: calls run without a modem audio channel
    std::size_t jitter_depth = 3;
    std::chrono::milliseconds audio_eof_grace{300};
  };

  CallManager(at::AtEngine& engine, Options options);
  ~CallManager();
  CallManager(const CallManager&) = delete;
  CallManager& operator=(const CallManager&) = delete;

  void set_listener(Listener listener);

  // `number` is "+336...", "0612..." or ">2" for a phonebook slot.
  // Throws Error(modem_busy) while another call is live, Error(invalid_number).
  CallInfo dial(const std::string& number, std::optional<UdpEndpoint> rtp_remote = std::nullopt);
  // Throws Error(not_found), Error(invalid_state).
  CallInfo answer(const std::string& id, std::optional<UdpEndpoint> rtp_remote = std::nullopt);
  // Idempotent on terminated calls.
  CallInfo hangup(const std::string& id);
  std::optional<CallInfo> get(const std::string& id) const;
  std::vector<CallInfo> list() const;

  // Feed every URC here (+CRING, +CLIP, NO CARRIER, BUSY, NO ANSWER).
  void on_urc(const at::Urc& urc);

  // Throws Error(not_found), Error(invalid_state) unless active, Error(conflict) if a tap is open.
  std::shared_ptr<AudioTap> open_tap(const std::string& id);

 private:
  struct Session;

  std::shared_ptr<Session> live_locked() const;
  std::shared_ptr<Session> find_locked(const std::string& id) const;
  std::shared_ptr<Session> create_locked(CallDirection dir, std::optional<UdpEndpoint> remote);
  void transition(const std::shared_ptr<Session>& s, CallState to, EndCause cause = EndCause::none);
  void emit(EventKind kind, const std::shared_ptr<Session>& s);
  CallInfo info(const Session& s) const;
  void start_bridge(const std::shared_ptr<Session>& s);
  void stop_bridge(Session& s);
  void uplink(std::shared_ptr<Session> s);
  void downlink(std::shared_ptr<Session> s);
  void run_dial(std::shared_ptr<Session> s, std::string command);

  at::AtEngine& engine_;
  Options options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  Listener listener_;
  std::vector<std::thread> workers_;
};

}  // namespace cellgate::call
