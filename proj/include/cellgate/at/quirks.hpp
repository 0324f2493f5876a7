#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cellgate/at/command.hpp"

namespace cellgate::at {

inline constexpr std::string_view kUnsupported = "unsupported";

// Per-model overrides for modems that reject standard commands.
struct QuirkProfile {
  std::string model_match;  // substring of the +CGMI / +CGMM reply
  std::map<std::string, std::string> command_overrides;  // name -> replacement name or "unsupported"
  std::vector<AtCommand> extra_init;

  bool matches(std::string_view manufacturer, std::string_view model) const;

  // nullopt when the command is marked unsupported; otherwise the (possibly renamed) command.
  std::optional<AtCommand> apply(const AtCommand& cmd) const;
};

// JSON: array of {model_match, command_overrides, extra_init: ["AT+FOO=1", ...]}.
std::vector<QuirkProfile> parse_quirk_profiles(const nlohmann::json& doc);
std::vector<QuirkProfile> load_quirk_profiles(const std::filesystem::path& path);

const QuirkProfile* select_profile(const std::vector<QuirkProfile>& profiles,
                                   std::string_view manufacturer, std::string_view model);

}  // namespace cellgate::at
