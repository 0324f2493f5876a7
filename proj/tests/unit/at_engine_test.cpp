#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <thread>

#include "gen.hpp"
#include "stack.hpp"
#include "cellgate/at/engine.hpp"
#include "cellgate/error.hpp"

namespace {

using namespace cellgate;
using namespace cellgate::at;
using namespace std::chrono_literals;

std::vector<std::string> frame(std::string_view bytes) {
  LineFramer f;
  return f.push(bytes);
}

TEST(LineFramer, AllTerminatorsSplit) {
  EXPECT_EQ(frame("A\rB\nC\r\nD\r\n"), (std::vector<std::string>{"A", "B", "C", "D"}));
}

TEST(LineFramer, KeepsPartialLineAcrossPushes) {
  LineFramer f;
  EXPECT_TRUE(f.push("+CSQ: 1").empty());
  EXPECT_EQ(f.pending(), "+CSQ: 1");
  EXPECT_EQ(f.push("8,99\r\n"), std::vector<std::string>{"+CSQ: 18,99"});
}

TEST(LineFramer, PromptOnlyWhenArmed) {
  LineFramer f;
  EXPECT_TRUE(f.push("> ").empty());
  f.reset();
  f.set_prompt_armed(true);
  EXPECT_EQ(f.push("\r\n> "), std::vector<std::string>{"> "});
}

TEST(LineFramer, ChunkingDoesNotChangeLines) {
  testsupport::gen::Rng rng(testsupport::gen::seed(21));
  for (int round = 0; round < 200; ++round) {
    std::string stream;
    int n = testsupport::gen::uniform(rng, 0, 30);
    for (int i = 0; i < n; ++i) stream += testsupport::gen::ascii_text(rng, 0, 20) + (i % 3 ? "\r\n" : "\n");
    auto whole = frame(stream);
    LineFramer f;
    std::vector<std::string> pieces;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      std::size_t k = static_cast<std::size_t>(testsupport::gen::uniform(rng, 1, 7));
      for (auto& l : f.push(std::string_view(stream).substr(pos, k))) pieces.push_back(l);
      pos += k;
    }
    ASSERT_EQ(pieces, whole);
  }
}

TEST(LineFramer, OverlongLineIsCut) {
  LineFramer f;
  auto lines = f.push(std::string(LineFramer::kMaxLine + 10, 'x'));
  EXPECT_LE(f.pending().size(), LineFramer::kMaxLine);
  (void)lines;
}

TEST(ParseLine, Classification) {
  const auto& urcs = default_urc_prefixes();
  auto as_line = [&](std::string_view s) { return std::get<AtResponseLine>(parse_line(s, urcs)); };
  EXPECT_EQ(as_line("OK").kind, AtResponseLine::Kind::final);
  EXPECT_EQ(as_line("OK").result.kind, FinalResult::Kind::ok);
  EXPECT_EQ(as_line("ERROR").result.kind, FinalResult::Kind::error);
  auto cme = as_line("+CME ERROR: 10");
  EXPECT_EQ(cme.result.kind, FinalResult::Kind::cme_error);
  EXPECT_EQ(cme.result.code, 10);
  EXPECT_EQ(as_line("+CMS ERROR: 322").result.kind, FinalResult::Kind::cms_error);
  EXPECT_EQ(as_line("NO CARRIER").result.kind, FinalResult::Kind::no_carrier);
  EXPECT_EQ(as_line("BUSY").result.kind, FinalResult::Kind::busy);
  EXPECT_EQ(as_line("NO ANSWER").result.kind, FinalResult::Kind::no_answer);
  EXPECT_EQ(as_line("> ").kind, AtResponseLine::Kind::prompt);
  EXPECT_EQ(as_line("AT+CSQ").kind, AtResponseLine::Kind::echo);
  auto info = as_line("+CSQ: 18,99");
  EXPECT_EQ(info.kind, AtResponseLine::Kind::info);
  EXPECT_EQ(info.prefix, "+CSQ");
  EXPECT_EQ(info.raw_values, "18,99");
  EXPECT_EQ(as_line("SIM800").prefix, "");

  auto urc = std::get<Urc>(parse_line("+CMTI: \"SM\",4", urcs));
  EXPECT_EQ(urc.prefix, "+CMTI");
  EXPECT_EQ(urc.payload, "\"SM\",4");
  EXPECT_EQ(std::get<Urc>(parse_line("RING", urcs)).prefix, "RING");
  // A prefix is only a URC when followed by ':' or the end of line.
  EXPECT_TRUE(std::holds_alternative<AtResponseLine>(parse_line("RINGTONE", urcs)));
}

TEST(AtCommand, SerializeAndParse) {
  EXPECT_EQ(serialize(AtCommand::execute("+CSQ")), "AT+CSQ\r");
  EXPECT_EQ(serialize(AtCommand::read("+CREG")), "AT+CREG?\r");
  EXPECT_EQ(serialize(AtCommand::test("+CMGS")), "AT+CMGS=?\r");
  EXPECT_EQ(serialize(AtCommand::set("+CPBS", {std::string("SM")})), "AT+CPBS=\"SM\"\r");
  EXPECT_EQ(serialize(AtCommand::set("+CPBW", {std::monostate{}, std::string("+331"), 145LL})), "AT+CPBW=,\"+331\",145\r");
  EXPECT_EQ(serialize(AtCommand::execute("E0")), "ATE0\r");
  for (std::string text : {"AT+CMEE=1", "AT+CPBS=\"SM\"", "ATE0", "AT+CSQ", "AT+CREG?", "AT+CLAC=?"}) {
    auto cmd = AtCommand::parse(text);
    EXPECT_EQ(serialize(cmd), text + "\r");
  }
  EXPECT_EQ(default_timeout_for("D"), kLongTimeout);
  EXPECT_EQ(default_timeout_for("+CSQ"), kDefaultTimeout);
}

TEST(AtCommand, ValidateRejectsBadArguments) {
  EXPECT_THROW(validate(AtCommand::set("+CPBS", {std::string("S\"M")})), Error);
  EXPECT_THROW(validate(AtCommand::execute("")), Error);
  EXPECT_NO_THROW(validate(AtCommand::set("+CMGR", {3LL})));
}

TEST(Quirks, RenameAndUnsupported) {
  auto profiles = parse_quirk_profiles(nlohmann::json::parse(R"([
    {"model_match": "SIM800", "command_overrides": {"+CHUP": "H", "+CLAC": "unsupported"}, "extra_init": ["AT+CSCLK=0"]}
  ])"));
  ASSERT_EQ(profiles.size(), 1u);
  const auto* p = select_profile(profiles, "SIMCOM_LTD", "SIM800 R14");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->apply(AtCommand::execute("+CHUP"))->name, "H");
  EXPECT_FALSE(p->apply(AtCommand::execute("+CLAC")));
  EXPECT_EQ(p->apply(AtCommand::execute("+CSQ"))->name, "+CSQ");
  EXPECT_EQ(p->extra_init.size(), 1u);
  EXPECT_EQ(select_profile(profiles, "Quectel", "EC25"), nullptr);
  EXPECT_THROW(parse_quirk_profiles(nlohmann::json::parse(R"({"x":1})")), Error);
}

// A DCE on the far end of a memory pair that answers each command line through `handler`.
class ScriptedDce {
 public:
  using Handler = std::function<std::string(const std::string& line)>;
  ScriptedDce(std::unique_ptr<ByteChannel> ch, Handler h) : ch_(std::move(ch)), handler_(std::move(h)) {
    thread_ = std::thread([this] {
      std::string buf;
      std::array<char, 256> tmp{};
      while (!stop_) {
        std::size_t n = 0;
        try {
          n = ch_->read(tmp, 10ms);
        } catch (const Error&) {
          return;
        }
        buf.append(tmp.data(), n);
        std::size_t cr;
        while ((cr = buf.find_first_of("\r\x1A\x1B")) != std::string::npos) {
          std::string line = buf.substr(0, cr + (buf[cr] == '\r' ? 0 : 1));
          buf.erase(0, cr + 1);
          lines_.push_back(line);
          auto out = handler_(line);
          if (!out.empty()) ch_->write(out);
        }
      }
    });
  }
  ~ScriptedDce() {
    stop_ = true;
    thread_.join();
  }
  void write(std::string_view s) { ch_->write(s); }
  void close() { ch_->close(); }
  std::vector<std::string> lines_;

 private:
  std::unique_ptr<ByteChannel> ch_;
  Handler handler_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

struct Rig {
  explicit Rig(ScriptedDce::Handler h) {
    auto [a, b] = make_memory_pair();
    engine = std::make_unique<AtEngine>(std::move(a));
    dce = std::make_unique<ScriptedDce>(std::move(b), std::move(h));
  }
  std::unique_ptr<AtEngine> engine;
  std::unique_ptr<ScriptedDce> dce;
};

TEST(AtEngine, CollectsInfoLinesAndSkipsEcho) {
  Rig rig([](const std::string& l) {
    if (l == "AT+CSQ") return std::string("AT+CSQ\r\r\n+CSQ: 18,99\r\n\r\nOK\r\n");
    return std::string("\r\nERROR\r\n");
  });
  auto r = rig.engine->execute(AtCommand::execute("+CSQ"));
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.info.size(), 1u);
  EXPECT_EQ(r.value("+CSQ"), "18,99");
  EXPECT_EQ(rig.engine->line_stats().echo, 1u);
}

TEST(AtEngine, ErrorFinalsAreResultsAndExpectOkThrows) {
  Rig rig([](const std::string&) { return std::string("\r\n+CME ERROR: 10\r\n"); });
  auto r = rig.engine->execute(AtCommand::read("+CPIN"));
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.final.kind, FinalResult::Kind::cme_error);
  EXPECT_EQ(r.final.code, 10);
  EXPECT_THROW(expect_ok(r, "+CPIN?"), AtCommandError);
}

TEST(AtEngine, UrcDuringCommandGoesToSubscribers) {
  Rig rig([](const std::string&) { return std::string("\r\n+CMTI: \"SM\",2\r\n+CPBR: 1,\"+331\",145,\"A\"\r\nRING\r\n\r\nOK\r\n"); });
  auto sub = rig.engine->subscribe_urcs();
  auto r = rig.engine->execute(AtCommand::set("+CPBR", {1LL}));
  ASSERT_EQ(r.info.size(), 1u);
  EXPECT_EQ(r.info[0].prefix, "+CPBR");
  auto u1 = sub.next(1s);
  auto u2 = sub.next(1s);
  ASSERT_TRUE(u1 && u2);
  EXPECT_EQ(u1->prefix, "+CMTI");
  EXPECT_EQ(u2->prefix, "RING");
}

TEST(AtEngine, IdleLinesAreUrcs) {
  Rig rig([](const std::string&) { return std::string(); });
  auto sub = rig.engine->subscribe_urcs();
  rig.dce->write("\r\n+CREG: 5\r\n\r\nNO CARRIER\r\n");
  auto a = sub.next(1s);
  auto b = sub.next(1s);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->prefix, "+CREG");
  EXPECT_EQ(a->payload, "5");
  EXPECT_EQ(b->prefix, "NO CARRIER");
}

TEST(AtEngine, TimeoutThenRecovers) {
  std::atomic<int> calls{0};
  Rig rig([&](const std::string&) { return ++calls == 1 ? std::string() : std::string("\r\nOK\r\n"); });
  auto cmd = AtCommand::execute("+CSQ");
  cmd.timeout = 100ms;
  try {
    rig.engine->execute(cmd);
    FAIL() << "expected a timeout";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::timeout);
  }
  cmd.timeout = 2s;
  EXPECT_TRUE(rig.engine->execute(cmd).ok());
}

TEST(AtEngine, PayloadExchangeSendsBodyAndCtrlZ) {
  Rig rig([](const std::string& l) {
    if (l == "AT+CMGS=20") return std::string("\r\n> ");
    if (!l.empty() && l.back() == '\x1A') return std::string("\r\n+CMGS: 7\r\n\r\nOK\r\n");
    if (!l.empty() && l.back() == '\x1B') return std::string("\r\nOK\r\n");
    return std::string("\r\nERROR\r\n");
  });
  auto cmd = AtCommand::set("+CMGS", {20LL});
  cmd.expects_prompt = true;
  {
    auto ex = rig.engine->begin_payload(cmd);
    auto r = ex.send("0011000B913316325476F80000AA0568656C6C6F");
    EXPECT_TRUE(r.ok());
    EXPECT_EQ(r.value("+CMGS"), "7");
  }
  {
    auto ex = rig.engine->begin_payload(cmd);
    auto r = ex.send("\x1B");
    EXPECT_TRUE(r.aborted);
  }
  {
    // Dropping the exchange unsent cancels with ESC and frees the slot.
    auto ex = rig.engine->begin_payload(cmd);
  }
  EXPECT_TRUE(rig.engine->execute(AtCommand::parse("AT+CMGS=?")).final.kind == FinalResult::Kind::error);
}

TEST(AtEngine, PlainExecuteRefusesPromptCommands) {
  Rig rig([](const std::string&) { return std::string("\r\nOK\r\n"); });
  auto cmd = AtCommand::set("+CMGS", {20LL});
  cmd.expects_prompt = true;
  EXPECT_THROW(rig.engine->execute(cmd), Error);
}

TEST(AtEngine, QuirkProfileRefusesLocally) {
  Rig rig([](const std::string&) { return std::string("\r\nOK\r\n"); });
  QuirkProfile p;
  p.command_overrides["+CLAC"] = "unsupported";
  p.command_overrides["+CHUP"] = "H";
  rig.engine->set_quirk_profile(p);
  auto r = rig.engine->execute(AtCommand::execute("+CLAC"));
  EXPECT_TRUE(r.unsupported);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(rig.engine->execute(AtCommand::execute("+CHUP")).ok());
  std::this_thread::sleep_for(20ms);
  ASSERT_FALSE(rig.dce->lines_.empty());
  EXPECT_EQ(rig.dce->lines_.back(), "ATH");
}

TEST(AtEngine, ClosedTransportFailsCommands) {
  Rig rig([](const std::string&) { return std::string(); });
  rig.dce->close();
  EXPECT_TRUE(testsupport::eventually([&] { return rig.engine->closed(); }, 2s));
  try {
    rig.engine->execute(AtCommand::execute("+CSQ"));
    FAIL() << "expected transport_closed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::transport_closed);
  }
}

TEST(AtEngine, SingleFlightUnderConcurrentSubmitters) {
  std::atomic<int> busy{0}, overlap{0};
  Rig rig([&](const std::string& l) {
    if (busy++ != 0) ++overlap;
    std::this_thread::sleep_for(200us);
    auto tag = l.substr(l.find('=') + 1);
    --busy;
    return "\r\n+XQ: " + tag + "\r\n\r\nOK\r\n";
  });
  std::vector<std::thread> threads;
  std::atomic<int> wrong{0};
  for (int t = 0; t < 16; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 40; ++i) {
        auto tag = std::to_string(t * 1000 + i);
        auto r = rig.engine->execute(AtCommand::parse("AT+XQ=" + tag));
        if (r.value("+XQ") != tag) ++wrong;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(wrong, 0);
  EXPECT_EQ(overlap, 0);
  EXPECT_EQ(rig.engine->max_in_flight(), 1);
}

TEST(AtEngine, RandomNoiseNeverBreaksTheEngine) {
  testsupport::gen::Rng rng(testsupport::gen::seed(22));
  Rig rig([](const std::string& l) { return l == "AT+XQ" ? std::string("\r\nOK\r\n") : std::string(); });
  auto sub = rig.engine->subscribe_urcs();
  std::string noise(100000, '\0');
  for (auto& c : noise) c = static_cast<char>(testsupport::gen::uniform(rng, 0, 255));
  rig.dce->write(noise);
  rig.dce->write("\r\n");
  std::this_thread::sleep_for(300ms);
  EXPECT_FALSE(rig.engine->closed());
  EXPECT_TRUE(rig.engine->execute(AtCommand::execute("+XQ")).ok());
}

}  // namespace
