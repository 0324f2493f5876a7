#include "cellgate/at/quirks.hpp"

#include <fstream>

#include "cellgate/error.hpp"

namespace cellgate::at {

bool QuirkProfile::matches(std::string_view manufacturer, std::string_view model) const {
  if (model_match.empty()) return false;
  return manufacturer.find(model_match) != std::string_view::npos ||
         model.find(model_match) != std::string_view::npos;
}

std::optional<AtCommand> QuirkProfile::apply(const AtCommand& cmd) const {
  auto it = command_overrides.find(cmd.name);
  if (it == command_overrides.end()) return cmd;
  if (it->second == kUnsupported) return std::nullopt;
  AtCommand out = cmd;
  out.name = it->second;
  return out;
}

std::vector<QuirkProfile> parse_quirk_profiles(const nlohmann::json& doc) {
  if (!doc.is_array()) fail(Errc::invalid_argument, "quirk profiles must be a JSON array");
  std::vector<QuirkProfile> out;
  for (const auto& item : doc) {
    QuirkProfile p;
    p.model_match = item.at("model_match").get<std::string>();
    if (item.contains("command_overrides")) {
      for (const auto& [k, v] : item["command_overrides"].items()) {
        p.command_overrides[k] = v.get<std::string>();
      }
    }
    if (item.contains("extra_init")) {
      for (const auto& c : item["extra_init"]) {
        p.extra_init.push_back(AtCommand::parse(c.get<std::string>()));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<QuirkProfile> load_quirk_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::not_found, "cannot open quirk profiles " + path.string());
  try {
    return parse_quirk_profiles(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument, std::string("bad quirk profile file: ") + e.what());
  }
}

const QuirkProfile* select_profile(const std::vector<QuirkProfile>& profiles,
                                   std::string_view manufacturer, std::string_view model) {
  for (const auto& p : profiles) {
    if (p.matches(manufacturer, model)) return &p;
  }
  return nullptr;
}

}  // namespace cellgate::at
