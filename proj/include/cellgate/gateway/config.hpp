#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

namespace cellgate::gateway {

struct SurveillanceConfig {
  std::string alert_number;
  bool enabled = false;
  std::string message_template = "Motion detected at {time}";
};

nlohmann::json to_json(const SurveillanceConfig& c);
// Throws Error(invalid_argument) when enabled without a usable alert number.
SurveillanceConfig surveillance_from_json(const nlohmann::json& j);

struct GatewayConfig {
  std::string transport;
  std::string auth_token;
  std::optional<std::string> sim_pin;
  std::string mmsc_url;
  std::string quirk_profiles_path;
  std::string share_root = "./share";
  std::string rtp_bind = "127.0.0.1";
  std::optional<SurveillanceConfig> surveillance;

  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 8080;
  // Where the modem's PCM audio channel lives; calls run without audio when unset.
  std::optional<std::string> audio_transport;
  // Share owner of `auth_token`.
  std::string owner = "admin";
  // Additional owner -> token pairs, each with its own share space.
  std::map<std::string, std::string> users;
  bool sms_text_mode = false;
  std::optional<std::uint8_t> sms_validity_relative;
  bool mms_auto_retrieve = true;
};

// Reads the JSON document, then applies CELLGATE_TOKEN from the environment.
// Throws Error(invalid_argument) on a malformed file or a token shorter than 16 characters.
GatewayConfig load_config(const std::string& path);
GatewayConfig config_from_json(const nlohmann::json& j);
// Path from `flag` when set, otherwise CELLGATE_CONFIG, otherwise empty.
std::string resolve_config_path(const std::optional<std::string>& flag);
void apply_env(GatewayConfig& cfg);
void validate(const GatewayConfig& cfg);

}  // namespace cellgate::gateway
