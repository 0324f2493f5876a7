#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "cellgate/at/engine.hpp"
#include "cellgate/at/quirks.hpp"
#include "cellgate/sms/pdu.hpp"

namespace cellgate::services {

enum class Registration { not_registered, registered_home, searching, denied, unknown, registered_roaming };
std::string_view to_string(Registration r) noexcept;
// <stat> of +CREG; out-of-table values map to unknown.
Registration registration_from_stat(long long stat) noexcept;

struct ModemStatus {
  std::optional<Registration> registration;
  std::optional<int> rssi_dbm;
  std::optional<int> ber_class;
};

// +CSQ <rssi>: -113 + 2n dBm for n in 0..31, absent otherwise.
std::optional<int> rssi_dbm_from_csq(long long n) noexcept;
// +CSQ <ber>: 0..7, absent otherwise.
std::optional<int> ber_from_csq(long long ber) noexcept;
// Parses the raw values of "+CSQ: n,ber". Malformed input yields absent fields.
ModemStatus parse_csq(std::string_view raw);

enum class Service { sms, mms, voice, phonebook, sim_access };
std::string_view to_string(Service s) noexcept;

struct ServiceRule {
  Service service;
  std::vector<std::string> requires_all;
};
// Which commands each service needs. MMS rides on HTTP and is gated by configuration instead.
const std::vector<ServiceRule>& service_table();
std::set<Service> derive_services(const std::set<std::string>& commands, bool mms_configured);
// "AT+CMGS" / "+cmgs" -> "+CMGS".
std::string normalize_command_name(std::string_view name);

struct CapabilityCatalog {
  std::set<std::string> supported_commands;
  std::set<Service> derived_services;
  bool probed = false;  // true when +CLAC failed and "=?" probing filled the set
  bool has(Service s) const { return derived_services.count(s) != 0; }
};

struct ModemProfile {
  std::string manufacturer;
  std::string model;
  std::optional<std::string> quirk_profile;  // model_match of the selected profile
};

enum class MessageStatus { unread, read, unsent, sent };
std::string_view to_string(MessageStatus s) noexcept;

struct StoredMessage {
  std::string store;
  int index = 0;
  MessageStatus status = MessageStatus::unread;
  std::string pdu;  // hex as listed by the modem; empty in text mode
  std::string direction;  // "deliver" | "submit"
  std::string peer;       // originator or destination
  std::string text;
  std::optional<std::string> timestamp;
  std::optional<sms::ConcatHeader> concat;
};

enum class ListFilter { all, unread, read };

struct SegmentOutcome {
  int seq = 1;
  std::optional<int> message_ref;
  std::optional<int> cms_error;
  std::string error;
};

struct SmsSendResult {
  std::vector<SegmentOutcome> segments;
  std::vector<int> refs() const;
  bool all_ok() const;
};

struct PhonebookEntry {
  int index = 0;
  std::string number;
  int type = 129;
  std::string text;
  bool operator==(const PhonebookEntry&) const = default;
};

struct PhonebookLimits {
  int first = 1;
  int last = 0;
  int number_length = 0;
  int text_length = 0;
};

struct Snapshot {
  std::string taken_at;
  std::vector<PhonebookEntry> phonebook;
  std::map<std::string, std::vector<StoredMessage>> messages;
  std::vector<std::string> media;
};

struct SyncEdits {
  std::vector<PhonebookEntry> phonebook_upserts;  // index 0 = add at first free slot
  std::vector<int> phonebook_deletes;
  std::vector<std::pair<std::string, int>> message_deletes;  // (store, index)
  bool empty() const {
    return phonebook_upserts.empty() && phonebook_deletes.empty() && message_deletes.empty();
  }
};

struct SyncItemResult {
  std::string target;  // "phonebook" | "message"
  std::string op;      // "add" | "update" | "delete"
  int index = 0;
  std::string result;  // "applied" | "conflict" | "error"
  std::string detail;
};

// Entries of `desired` not present in `base` become adds; same index with different content, updates.
SyncEdits diff_phonebook(const std::vector<PhonebookEntry>& base, const std::vector<PhonebookEntry>& desired);

nlohmann::json to_json(const ModemStatus& s);
nlohmann::json to_json(const StoredMessage& m);
nlohmann::json to_json(const PhonebookEntry& e);
nlohmann::json to_json(const Snapshot& s);
nlohmann::json to_json(const SyncItemResult& r);
PhonebookEntry phonebook_entry_from_json(const nlohmann::json& j);
Snapshot snapshot_from_json(const nlohmann::json& j);
SyncEdits sync_edits_from_json(const nlohmann::json& j);

class ModemServices {
 public:
  struct Config {
    std::optional<std::string> sim_pin;
    std::vector<at::QuirkProfile> quirk_profiles;
    bool mms_configured = false;
    bool text_mode = false;
    std::optional<std::uint8_t> validity_relative;
  };

  ModemServices(at::AtEngine& engine, Config config);

  // Runs the init sequence. Throws Error(sim_pin_required / sim_puk / init_failed).
  std::pair<ModemProfile, CapabilityCatalog> init();
  bool ready() const;

  ModemStatus status();
  CapabilityCatalog catalog() const;
  // Re-reads the command list from the modem.
  CapabilityCatalog refresh_catalog();

  // Throws Error(capability_missing) without sms, Error(invalid_number) for a bad address.
  // Per-segment failures are reported in the result; a first-segment failure throws.
  SmsSendResult send_sms(const std::string& to, const std::string& text);
  StoredMessage fetch_message(const std::string& store, int index);
  std::vector<StoredMessage> list_messages(const std::string& store, ListFilter filter);
  void delete_message(const std::string& store, int index);

  void phonebook_select(const std::string& store);
  PhonebookLimits phonebook_limits();
  std::vector<PhonebookEntry> phonebook_read(int first, int last);
  std::optional<PhonebookEntry> phonebook_read(int index);
  // Returns the index written; index 0 lets the modem pick the first free slot.
  int phonebook_write(const PhonebookEntry& entry);
  void phonebook_delete(int index);
  std::vector<PhonebookEntry> phonebook_find(const std::string& prefix);

  Bytes sim_apdu(std::span<const std::uint8_t> command);
  // Hex in, hex out. Odd-length or non-hex input throws Error(invalid_argument).
  std::string sim_apdu_hex(std::string_view command_hex);

  Snapshot snapshot();
  std::vector<SyncItemResult> sync(const Snapshot& base, const SyncEdits& edits);

  at::AtEngine& engine() noexcept { return engine_; }

 private:
  at::AtResponse run(const at::AtCommand& cmd);
  at::AtResponse run_ok(const at::AtCommand& cmd);
  void require(Service s) const;
  std::set<std::string> read_command_list(bool& probed);
  void select_message_store(const std::string& store);
  StoredMessage decode_stored(const std::string& store, int index, int stat, const std::string& pdu) const;
  std::vector<PhonebookEntry> parse_entries(const at::AtResponse& r, std::string_view prefix) const;

  at::AtEngine& engine_;
  Config config_;
  mutable std::mutex mu_;
  bool ready_ = false;
  ModemProfile profile_;
  CapabilityCatalog catalog_;
  std::string message_store_;
  std::string phonebook_store_;
  std::optional<PhonebookLimits> limits_;
  std::uint16_t concat_ref_ = 0;
};

}  // namespace cellgate::services
