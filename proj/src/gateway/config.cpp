#include "cellgate/gateway/config.hpp"

#include <cstdlib>
#include <fstream>

#include "cellgate/error.hpp"
#include "cellgate/sms/pdu.hpp"

namespace cellgate::gateway {

using nlohmann::json;

json to_json(const SurveillanceConfig& c) {
  return {{"alert_number", c.alert_number}, {"enabled", c.enabled}, {"message_template", c.message_template}};
}

SurveillanceConfig surveillance_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::invalid_argument, "surveillance config must be an object");
  SurveillanceConfig c;
  try {
    c.alert_number = j.value("alert_number", std::string());
    c.enabled = j.value("enabled", false);
    c.message_template = j.value("message_template", c.message_template);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("surveillance config: ") + e.what());
  }
  if (c.enabled) {
    if (c.alert_number.empty()) fail(Errc::invalid_argument, "alert_number is required when enabled");
    auto addr = sms::Address::parse(c.alert_number);
    if (addr.ton == sms::Ton::alphanumeric) fail(Errc::invalid_number, "alert_number must be a phone number");
    addr.validate();
  }
  return c;
}

GatewayConfig config_from_json(const json& j) {
  GatewayConfig c;
  try {
    c.transport = j.value("transport", std::string());
    c.auth_token = j.value("auth_token", std::string());
    if (j.contains("sim_pin") && !j.at("sim_pin").is_null()) c.sim_pin = j.at("sim_pin").get<std::string>();
    c.mmsc_url = j.value("mmsc_url", std::string());
    c.quirk_profiles_path = j.value("quirk_profiles_path", std::string());
    c.share_root = j.value("share_root", c.share_root);
    c.rtp_bind = j.value("rtp_bind", c.rtp_bind);
    if (j.contains("surveillance") && !j.at("surveillance").is_null()) {
      c.surveillance = surveillance_from_json(j.at("surveillance"));
    }
    if (j.contains("listen")) {
      auto listen = j.at("listen").get<std::string>();
      auto colon = listen.rfind(':');
      if (colon == std::string::npos) fail(Errc::invalid_argument, "listen must be host:port");
      c.listen_host = listen.substr(0, colon);
      auto port = parse_int(listen.substr(colon + 1));
      if (!port || *port < 0 || *port > 65535) fail(Errc::invalid_argument, "bad listen port");
      c.listen_port = static_cast<std::uint16_t>(*port);
    }
    if (j.contains("audio_transport") && !j.at("audio_transport").is_null()) {
      c.audio_transport = j.at("audio_transport").get<std::string>();
    }
    c.owner = j.value("owner", c.owner);
    if (j.contains("users")) c.users = j.at("users").get<std::map<std::string, std::string>>();
    c.sms_text_mode = j.value("sms_text_mode", false);
    if (j.contains("sms_validity_relative")) c.sms_validity_relative = j.at("sms_validity_relative").get<std::uint8_t>();
    c.mms_auto_retrieve = j.value("mms_auto_retrieve", true);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  return c;
}

void apply_env(GatewayConfig& cfg) {
  if (const char* token = std::getenv("CELLGATE_TOKEN"); token && *token) cfg.auth_token = token;
}

void validate(const GatewayConfig& cfg) {
  if (cfg.transport.empty()) fail(Errc::invalid_argument, "config: transport is required");
  if (cfg.auth_token.size() < 16) fail(Errc::invalid_argument, "config: auth_token must be at least 16 characters");
  for (const auto& [owner, token] : cfg.users) {
    if (token.size() < 16) fail(Errc::invalid_argument, "config: token of user " + owner + " is too short");
  }
}

GatewayConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::invalid_argument, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, "config " + path + ": " + e.what());
  }
  auto cfg = config_from_json(doc);
  apply_env(cfg);
  validate(cfg);
  return cfg;
}

std::string resolve_config_path(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("CELLGATE_CONFIG"); env && *env) return env;
  return {};
}

}  // namespace cellgate::gateway
