#pragma once

#include <chrono>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cellgate/clock.hpp"

namespace cellgate::at {

using namespace std::chrono_literals;

inline constexpr auto kDefaultTimeout = std::chrono::milliseconds(5000);
inline constexpr auto kLongTimeout = std::chrono::milliseconds(30000);

struct AtCommand {
  enum class Kind { execute, read, test, set };

  // A `set` argument: omitted, quoted string, or bare integer.
  using Arg = std::variant<std::monostate, std::string, long long>;

  std::string name;
  Kind kind = Kind::execute;
  std::vector<Arg> args;
  std::chrono::milliseconds timeout = kDefaultTimeout;
  bool expects_prompt = false;

  static AtCommand execute(std::string name);
  static AtCommand read(std::string name);
  static AtCommand test(std::string name);
  static AtCommand set(std::string name, std::vector<Arg> args);

  // Parses "AT+CMEE=1", "+CPBS=\"SM\"", "E0" ... into a command.
  static AtCommand parse(std::string_view text);

  bool operator==(const AtCommand&) const = default;
};

// Dial, answer and network interrogation get the long timeout.
std::chrono::milliseconds default_timeout_for(std::string_view name);

// Throws Error(invalid_argument) when the command violates its invariants.
void validate(const AtCommand& cmd);

// "AT" + body + CR.
std::string serialize(const AtCommand& cmd);

struct FinalResult {
  enum class Kind { ok, error, cme_error, cms_error, no_carrier, busy, no_answer, connect };

  Kind kind = Kind::ok;
  int code = 0;      // cme/cms error code
  std::string text;  // original line

  bool is_ok() const noexcept { return kind == Kind::ok || kind == Kind::connect; }
  bool operator==(const FinalResult& o) const noexcept { return kind == o.kind && code == o.code; }
};

std::string_view to_string(FinalResult::Kind kind) noexcept;

struct AtResponseLine {
  enum class Kind { info, final, prompt, echo, empty };

  Kind kind = Kind::empty;
  std::string prefix;      // info: text before ':'
  std::string raw_values;  // info: text after ':' (or the whole line)
  FinalResult result;      // final only
  std::string text;        // the full line
};

struct Urc {
  std::string prefix;
  std::string payload;
  SteadyTime received_at{};
};

using ParsedLine = std::variant<AtResponseLine, Urc>;

// Registered unsolicited prefixes the engine recognises out of the box.
const std::set<std::string>& default_urc_prefixes();

// Classifies one line (terminators already stripped).
ParsedLine parse_line(std::string_view raw, const std::set<std::string>& known_urc_prefixes);

// Splits a byte stream into lines. CR, LF and CRLF all terminate a line.
// When armed, a bare "> " (no terminator) is emitted as its own line.
class LineFramer {
 public:
  static constexpr std::size_t kMaxLine = 64 * 1024;

  std::vector<std::string> push(std::string_view bytes);
  void set_prompt_armed(bool armed) noexcept { prompt_armed_ = armed; }
  const std::string& pending() const noexcept { return partial_; }
  void reset() noexcept { partial_.clear(); }

 private:
  std::string partial_;
  bool prompt_armed_ = false;
};

}  // namespace cellgate::at
