#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "cellgate/clock.hpp"
#include "cellgate/sim/oracle_codec.hpp"

namespace cellgate::sim {

// Every command the simulator implements, as listed by +CLAC.
const std::set<std::string>& implemented_commands();

struct SimConfig {
  std::string manufacturer = "SIMCOM_LTD";
  std::string model = "SIM800";
  std::string pin = "0000";
  bool pin_locked = false;
  int signal_n = 18;
  int ber = 99;
  int registration = 1;
  std::size_t sms_capacity = 10;
  std::size_t phonebook_capacity = 250;
  int phonebook_number_length = 40;
  int phonebook_text_length = 18;
  std::set<std::string> capabilities = implemented_commands();
  std::chrono::milliseconds dial_delay{200};
  std::string dial_outcome = "ok";  // ok | busy | no_answer | no_carrier
  std::chrono::milliseconds ring_interval{2000};
  int tone_hz = 440;
  int tone_ms = 3000;
  bool echo = true;
  // Service-centre time stamped on injected messages; wall clock when unset.
  std::optional<oracle::DeliverSpec> sms_time;
};

struct SentSms {
  int message_ref = 0;
  std::string pdu;  // empty in text mode
  int tpdu_len = 0;
  std::string destination;
  std::string text;
  std::string alphabet;
  std::optional<oracle::Concat> concat;
};

enum class SimCallState { none, dialing, ringing, active };

// A virtual DCE. Bytes from the DTE go in through feed(); everything the modem says
// accumulates and is collected with take_output(). poll() advances timed behaviour
// (ring cadence, dial completion) against the injected clock.
class ModemSim {
 public:
  explicit ModemSim(SimConfig config = {}, std::shared_ptr<Clock> clock = system_clock());

  void feed(std::string_view bytes);
  void poll();
  std::string take_output();

  // Control plane. Each returns an error string on refusal, empty on success.
  struct InjectResult {
    std::optional<int> index;  // nullopt on overflow
    std::string error;
  };
  InjectResult inject_sms(const oracle::DeliverSpec& spec, const std::string& store = "SM");
  InjectResult inject_sms_pdu(const std::string& pdu_hex, const std::string& store = "SM");
  std::string inject_call(const std::string& from, const std::string& type = "VOICE");
  void remote_hangup();
  void set_signal(int n, int ber);
  void set_registration(int stat);
  void set_capabilities(std::set<std::string> caps);
  std::set<std::string> capabilities() const;
  void script_apdu(std::map<std::string, std::string> table);
  void set_dial(std::string outcome, std::chrono::milliseconds delay);
  void set_tone(int hz, int ms);
  void set_pin(bool locked, const std::string& code);

  nlohmann::json state() const;
  std::vector<SentSms> sent() const;

  // Audio side channel.
  SimCallState call_state() const;
  // Bumped each time a call becomes active; 0 while none is.
  std::uint64_t active_generation() const;
  std::pair<int, int> tone() const;
  void count_inbound_audio(std::size_t bytes);
  void count_outbound_frame();

 private:
  struct Message {
    std::string pdu;
    int stat = 0;  // 0 unread, 1 read, 2 unsent, 3 sent
    std::string peer;
    std::string text;
    std::string scts;  // text-mode timestamp
  };
  struct Entry {
    std::string number;
    int type = 129;
    std::string text;
  };
  struct Call {
    SimCallState state = SimCallState::none;
    std::string peer;
    std::string type = "VOICE";
    SteadyTime due{};  // dial completion or next ring
    int rings = 0;
  };

  void handle_line(const std::string& line);
  void handle_payload(const std::string& body);
  void reply(const std::string& line);
  void ok() { reply("OK"); }
  void error() { reply("ERROR"); }
  void cme(int code);
  void cms(int code);
  bool sim_ready() const;
  bool registered() const;

  void cmd_extended(const std::string& name, const std::string& kind, const std::string& args);
  void cmd_dial(const std::string& rest);
  void cmd_cmgs(const std::string& args);
  void cmd_cmgr(const std::string& args);
  void cmd_cmgl(const std::string& args);
  void cmd_cpbr(const std::string& kind, const std::string& args);
  void cmd_cpbw(const std::string& args);
  std::string pb_line(const std::string& prefix, int index, const Entry& e) const;
  std::map<int, Message>& store(const std::string& name);
  std::string cmgl_stat(int stat) const;
  void end_call();

  SimConfig cfg_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mu_;
  std::string out_;
  std::string line_;
  bool in_payload_ = false;
  std::string payload_;
  std::string payload_arg_;
  int attempts_left_ = 3;
  bool puk_ = false;
  int cmee_ = 0;
  int crc_ = 0;
  int clip_ = 0;
  int cnmi_mode_ = 0, cnmi_mt_ = 0;
  int cmgf_ = 0;
  int creg_n_ = 0;
  int csta_ = 129;
  std::string read_store_ = "SM";
  std::string pb_store_ = "SM";
  std::map<std::string, std::map<int, Message>> stores_;
  std::map<std::string, std::map<int, Entry>> phonebooks_;
  std::map<std::string, std::string> apdu_;
  std::vector<SentSms> sent_;
  int next_mr_ = 0;
  Call call_;
  std::uint64_t generation_ = 0;
  std::uint64_t audio_in_bytes_ = 0;
  std::uint64_t audio_out_frames_ = 0;
};

}  // namespace cellgate::sim
