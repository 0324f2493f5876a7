#include "cellgate/at/command.hpp"

#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate::at {

AtCommand AtCommand::execute(std::string name) {
  AtCommand c;
  c.timeout = default_timeout_for(name);
  c.name = std::move(name);
  c.kind = Kind::execute;
  return c;
}

AtCommand AtCommand::read(std::string name) {
  auto c = execute(std::move(name));
  c.kind = Kind::read;
  return c;
}

AtCommand AtCommand::test(std::string name) {
  auto c = execute(std::move(name));
  c.kind = Kind::test;
  return c;
}

AtCommand AtCommand::set(std::string name, std::vector<Arg> args) {
  auto c = execute(std::move(name));
  c.kind = Kind::set;
  c.args = std::move(args);
  return c;
}

AtCommand AtCommand::parse(std::string_view text) {
  text = trim(text);
  if (starts_with_icase(text, "AT")) text.remove_prefix(2);
  if (text.empty()) fail(Errc::invalid_argument, "empty command");
  if (text.ends_with("=?")) return test(std::string(text.substr(0, text.size() - 2)));
  if (text.ends_with("?")) return read(std::string(text.substr(0, text.size() - 1)));
  auto eq = text.find('=');
  if (eq == std::string_view::npos) return execute(std::string(text));
  std::vector<Arg> args;
  std::string_view rest = text.substr(eq + 1);
  std::size_t i = 0;
  for (;;) {
    std::size_t start = i;
    if (i < rest.size() && rest[i] == '"') {
      auto close = rest.find('"', i + 1);
      if (close == std::string_view::npos) fail(Errc::invalid_argument, "unbalanced quotes");
      args.emplace_back(std::string(rest.substr(i + 1, close - i - 1)));
      i = close + 1;
    } else {
      while (i < rest.size() && rest[i] != ',') ++i;
      auto token = trim(rest.substr(start, i - start));
      if (token.empty()) {
        args.emplace_back(std::monostate{});
      } else if (auto v = parse_int(token)) {
        args.emplace_back(*v);
      } else {
        fail(Errc::invalid_argument, "unquoted non-numeric argument: " + std::string(token));
      }
    }
    if (i >= rest.size()) break;
    if (rest[i] != ',') fail(Errc::invalid_argument, "garbage after quoted argument");
    ++i;
  }
  return set(std::string(text.substr(0, eq)), std::move(args));
}

std::chrono::milliseconds default_timeout_for(std::string_view name) {
  if (name.empty()) return kDefaultTimeout;
  char first = name.front();
  if (first == 'D' || first == 'd' || name == "A" || name == "a") return kLongTimeout;
  if (name == "+COPS" || name == "+CLCK" || name == "+CCFC") return kLongTimeout;
  return kDefaultTimeout;
}

void validate(const AtCommand& cmd) {
  if (cmd.name.empty()) fail(Errc::invalid_argument, "command name is empty");
  for (char c : cmd.name) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u > 0x7E || c == '=' || c == '?' || c == '"') {
      fail(Errc::invalid_argument, "command name has a forbidden character");
    }
  }
  if (cmd.timeout.count() <= 0) fail(Errc::invalid_argument, "timeout must be positive");
  if (cmd.kind == AtCommand::Kind::set) {
    if (cmd.args.empty()) fail(Errc::invalid_argument, "set command needs at least one argument");
    for (const auto& a : cmd.args) {
      if (auto s = std::get_if<std::string>(&a)) {
        if (s->find_first_of("\r\n\"") != std::string::npos) {
          fail(Errc::invalid_argument, "string argument contains CR/LF or a quote");
        }
      }
    }
  } else if (!cmd.args.empty()) {
    fail(Errc::invalid_argument, "only set commands carry arguments");
  }
}

std::string serialize(const AtCommand& cmd) {
  validate(cmd);
  std::string out = "AT" + cmd.name;
  switch (cmd.kind) {
    case AtCommand::Kind::execute: break;
    case AtCommand::Kind::read: out += '?'; break;
    case AtCommand::Kind::test: out += "=?"; break;
    case AtCommand::Kind::set: {
      out += '=';
      bool first = true;
      for (const auto& a : cmd.args) {
        if (!first) out += ',';
        first = false;
        if (auto s = std::get_if<std::string>(&a)) {
          out += '"';
          out += *s;
          out += '"';
        } else if (auto v = std::get_if<long long>(&a)) {
          out += std::to_string(*v);
        }
      }
      break;
    }
  }
  out += '\r';
  return out;
}

std::string_view to_string(FinalResult::Kind kind) noexcept {
  switch (kind) {
    case FinalResult::Kind::ok: return "ok";
    case FinalResult::Kind::error: return "error";
    case FinalResult::Kind::cme_error: return "cme_error";
    case FinalResult::Kind::cms_error: return "cms_error";
    case FinalResult::Kind::no_carrier: return "no_carrier";
    case FinalResult::Kind::busy: return "busy";
    case FinalResult::Kind::no_answer: return "no_answer";
    case FinalResult::Kind::connect: return "connect";
  }
  return "?";
}

const std::set<std::string>& default_urc_prefixes() {
  static const std::set<std::string> prefixes = {
      "RING", "+CRING", "+CLIP", "+CMTI", "+CMT", "+CDS", "+CDSI", "+CBM", "+CREG", "+CUSD", "+CCWA",
  };
  return prefixes;
}

namespace {

bool matches_urc(std::string_view line, const std::string& prefix) {
  if (!line.starts_with(prefix)) return false;
  if (line.size() == prefix.size()) return true;
  return line[prefix.size()] == ':';
}

std::optional<FinalResult> parse_final(std::string_view line) {
  using K = FinalResult::Kind;
  FinalResult r;
  r.text = std::string(line);
  auto error_code = [&](std::string_view tag, K kind) -> std::optional<FinalResult> {
    if (!line.starts_with(tag)) return std::nullopt;
    r.kind = kind;
    auto v = parse_int(line.substr(tag.size()));
    // Verbose (+CMEE=2) text errors have no number; 100 is "unknown" in both tables.
    r.code = v && *v >= 0 ? static_cast<int>(*v) : 100;
    return r;
  };
  if (line == "OK") return r.kind = K::ok, r;
  if (line == "ERROR") return r.kind = K::error, r;
  if (line == "NO CARRIER") return r.kind = K::no_carrier, r;
  if (line == "BUSY") return r.kind = K::busy, r;
  if (line == "NO ANSWER") return r.kind = K::no_answer, r;
  if (line == "CONNECT" || line.starts_with("CONNECT ")) return r.kind = K::connect, r;
  if (auto e = error_code("+CME ERROR:", K::cme_error)) return e;
  if (auto e = error_code("+CMS ERROR:", K::cms_error)) return e;
  return std::nullopt;
}

}  // namespace

ParsedLine parse_line(std::string_view raw, const std::set<std::string>& known_urc_prefixes) {
  AtResponseLine line;
  line.text = std::string(raw);
  if (raw.empty()) {
    line.kind = AtResponseLine::Kind::empty;
    return line;
  }
  for (const auto& prefix : known_urc_prefixes) {
    if (matches_urc(raw, prefix)) {
      Urc urc;
      urc.prefix = prefix;
      auto rest = raw.substr(prefix.size());
      if (!rest.empty()) rest.remove_prefix(1);
      urc.payload = std::string(trim(rest));
      urc.received_at = std::chrono::steady_clock::now();
      return urc;
    }
  }
  if (auto fin = parse_final(raw)) {
    line.kind = AtResponseLine::Kind::final;
    line.result = std::move(*fin);
    return line;
  }
  if (raw == ">" || raw == "> ") {
    line.kind = AtResponseLine::Kind::prompt;
    return line;
  }
  if (starts_with_icase(raw, "AT")) {
    line.kind = AtResponseLine::Kind::echo;
    return line;
  }
  line.kind = AtResponseLine::Kind::info;
  auto colon = raw.find(':');
  if (colon != std::string_view::npos && colon > 0 &&
      raw.substr(0, colon).find_first_of(" \",") == std::string_view::npos) {
    line.prefix = std::string(raw.substr(0, colon));
    line.raw_values = std::string(trim(raw.substr(colon + 1)));
  } else {
    line.raw_values = std::string(raw);
  }
  return line;
}

std::vector<std::string> LineFramer::push(std::string_view bytes) {
  std::vector<std::string> lines;
  for (char c : bytes) {
    if (c == '\r' || c == '\n') {
      if (!partial_.empty()) lines.push_back(std::move(partial_));
      partial_.clear();
      continue;
    }
    partial_.push_back(c);
    if (partial_.size() >= kMaxLine) {
      lines.push_back(std::move(partial_));
      partial_.clear();
    }
  }
  if (prompt_armed_ && (partial_ == "> " || partial_ == ">")) {
    // "> " alone is the prompt; ">" waits for its space unless it's all we have.
    if (partial_ == "> ") {
      lines.push_back(std::move(partial_));
      partial_.clear();
    }
  }
  return lines;
}

}  // namespace cellgate::at
