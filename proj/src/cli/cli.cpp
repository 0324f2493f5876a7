#include "cellgate/cli/cli.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cellgate/cli/codec_json.hpp"
#include "cellgate/error.hpp"
#include "cellgate/gateway/config.hpp"
#include "cellgate/gateway/gateway.hpp"
#include "cellgate/gateway/http_server.hpp"
#include "cellgate/gateway/latency.hpp"
#include "cellgate/gateway/share.hpp"
#include "cellgate/sim/server.hpp"
#include "cellgate/util.hpp"
#include "httplib.h"

namespace cellgate::cli {

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::atomic<bool> g_shutdown{false};

// Failure reported with exit code 1.
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Globals {
  std::string url;
  std::string token;
  std::string config;
  bool pretty = false;
};

void resolve_endpoint(Globals& g) {
  std::optional<gateway::GatewayConfig> cfg;
  auto path = gateway::resolve_config_path(g.config.empty() ? std::nullopt : std::optional(g.config));
  if (!path.empty()) {
    try {
      cfg = gateway::config_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
      throw RunError("config " + path + ": " + e.what());
    }
  }
  if (g.url.empty()) {
    if (const char* e = std::getenv("CELLGATE_URL"); e && *e) g.url = e;
  }
  if (g.url.empty() && cfg) g.url = "http://" + cfg->listen_host + ":" + std::to_string(cfg->listen_port);
  if (g.url.empty()) g.url = "http://127.0.0.1:8080";
  if (g.token.empty()) {
    if (const char* e = std::getenv("CELLGATE_TOKEN"); e && *e) g.token = e;
  }
  if (g.token.empty() && cfg) g.token = cfg->auth_token;
}

class Api {
 public:
  explicit Api(const Globals& g) : g_(g), cli_(g.url) {
    cli_.set_connection_timeout(5);
    cli_.set_read_timeout(30);
  }

  json call(const std::string& method, const std::string& path, const std::optional<json>& body = std::nullopt) {
    httplib::Headers h{{"Authorization", "Bearer " + g_.token}};
    httplib::Result res{nullptr, httplib::Error::Unknown};
    std::string payload = body ? body->dump() : std::string();
    if (method == "GET") {
      res = cli_.Get(path, h);
    } else if (method == "POST") {
      res = cli_.Post(path, h, payload, "application/json");
    } else if (method == "PUT") {
      res = cli_.Put(path, h, payload, "application/json");
    } else {
      res = cli_.Delete(path, h);
    }
    if (!res) throw RunError("cannot reach " + g_.url + ": " + httplib::to_string(res.error()));
    if (res->status >= 400) {
      std::string msg = res->body;
      try {
        auto j = json::parse(res->body);
        msg = j.value("error", std::string("error")) + ": " + j.value("message", std::string());
      } catch (const json::exception&) {
      }
      throw RunError("HTTP " + std::to_string(res->status) + " " + msg);
    }
    if (res->body.empty()) return json::object();
    try {
      return json::parse(res->body);
    } catch (const json::exception&) {
      return json(res->body);
    }
  }

 private:
  const Globals& g_;
  httplib::Client cli_;
};

void emit(std::ostream& out, const Globals& g, const json& j) {
  if (g.pretty) {
    out << render_pretty(j);
  } else {
    out << j.dump() << '\n';
  }
  out.flush();
}

std::string url_encode(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

// Columns are padded by code point, not byte.
std::size_t display_width(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

void wait_for_shutdown() {
  while (!g_shutdown) std::this_thread::sleep_for(100ms);
}

}  // namespace

void request_shutdown() noexcept { g_shutdown = true; }
void reset_shutdown() noexcept { g_shutdown = false; }

std::string render_pretty(const json& j) {
  std::ostringstream out;
  if (j.is_array()) {
    std::vector<std::string> cols;
    for (const auto& row : j) {
      if (!row.is_object()) {
        out << cell(row) << '\n';
        continue;
      }
      for (const auto& [k, v] : row.items()) {
        if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
      }
    }
    if (cols.empty()) return out.str();
    std::vector<std::size_t> width(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) width[c] = display_width(cols[c]);
    for (const auto& row : j) {
      if (!row.is_object()) continue;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (row.contains(cols[c])) width[c] = std::max(width[c], display_width(cell(row[cols[c]])));
      }
    }
    auto line = [&](auto get) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        auto v = get(c);
        out << v << std::string(width[c] - display_width(v) + (c + 1 < cols.size() ? 2 : 0), ' ');
      }
      out << '\n';
    };
    line([&](std::size_t c) { return cols[c]; });
    for (const auto& row : j) {
      if (!row.is_object()) continue;
      line([&](std::size_t c) { return row.contains(cols[c]) ? cell(row[cols[c]]) : std::string(); });
    }
  } else if (j.is_object()) {
    std::size_t w = 0;
    for (const auto& [k, v] : j.items()) w = std::max(w, display_width(k));
    for (const auto& [k, v] : j.items()) out << k << std::string(w - display_width(k) + 2, ' ') << cell(v) << '\n';
  } else {
    out << cell(j) << '\n';
  }
  return out.str();
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cellgate: cellular services gateway", argv.empty() ? "cellgate" : argv[0]};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--url", g.url, "Gateway base URL (env CELLGATE_URL)");
  app.add_option("--token", g.token, "Bearer token (env CELLGATE_TOKEN)");
  app.add_option("--config", g.config, "Gateway config file (env CELLGATE_CONFIG)");
  app.add_flag("--pretty", g.pretty, "Tables instead of JSON");

  std::function<int()> action;

  // serve
  auto* serve = app.add_subcommand("serve", "Run the gateway");
  std::string serve_listen, serve_transport;
  serve->add_option("--listen", serve_listen, "host:port override");
  serve->add_option("--transport", serve_transport, "Modem transport override");
  serve->callback([&] {
    action = [&] {
      auto path = gateway::resolve_config_path(g.config.empty() ? std::nullopt : std::optional(g.config));
      if (path.empty()) throw RunError("serve needs --config or CELLGATE_CONFIG");
      auto doc = json::parse(read_file(path));
      if (!serve_listen.empty()) doc["listen"] = serve_listen;
      if (!serve_transport.empty()) doc["transport"] = serve_transport;
      auto cfg = gateway::config_from_json(doc);
      gateway::apply_env(cfg);
      gateway::validate(cfg);
      gateway::Gateway gw(cfg);
      gw.start();
      gateway::HttpServer http(gw, cfg.listen_host, cfg.listen_port);
      http.start();
      emit(out, g, {{"listening", http.base_url()}, {"transport", cfg.transport}});
      wait_for_shutdown();
      http.stop();
      gw.stop();
      return 0;
    };
  });

  // sim
  auto* simc = app.add_subcommand("sim", "Run the modem simulator (AT on port, control on port+1, audio on port+2)");
  std::string sim_host = "127.0.0.1", sim_mem, sim_config;
  int sim_port = 7000;
  simc->add_option("--host", sim_host);
  simc->add_option("--port", sim_port, "AT port; 0 picks free ports")->check(CLI::Range(0, 65533));
  simc->add_option("--mem", sim_mem, "Also accept in-process mem:<id> connections");
  simc->add_option("--sim-config", sim_config, "JSON file with simulator settings");
  simc->callback([&] {
    action = [&] {
      sim::SimConfig cfg;
      if (!sim_config.empty()) cfg = sim::sim_config_from_json(json::parse(read_file(sim_config)));
      sim::SimServerOptions opts;
      if (sim_port != 0) opts = sim::SimServerOptions::from_base_port(sim_host, static_cast<std::uint16_t>(sim_port));
      opts.host = sim_host;
      if (!sim_mem.empty()) opts.mem_id = sim_mem;
      sim::SimServer server(std::make_shared<sim::ModemSim>(cfg), opts);
      server.start();
      emit(out, g,
           {{"transport", server.at_transport()},
            {"audio_transport", server.audio_transport()},
            {"control", server.ctl_url()}});
      wait_for_shutdown();
      server.stop();
      return 0;
    };
  });

  // sms
  auto* sms = app.add_subcommand("sms", "Send and list SMS");
  sms->require_subcommand(1);
  auto* sms_send = sms->add_subcommand("send", "POST /v1/sms");
  std::string sms_to, sms_text;
  sms_send->add_option("--to", sms_to)->required();
  sms_send->add_option("--text", sms_text)->required();
  sms_send->callback([&] {
    action = [&] {
      emit(out, g, Api(g).call("POST", "/v1/sms", json{{"to", sms_to}, {"text", sms_text}}));
      return 0;
    };
  });
  auto* sms_list = sms->add_subcommand("list", "GET /v1/sms");
  std::string sms_box = "inbox";
  sms_list->add_option("--box", sms_box)->check(CLI::IsMember({"inbox", "outbox", "sent"}));
  sms_list->callback([&] {
    action = [&] {
      emit(out, g, Api(g).call("GET", "/v1/sms?box=" + sms_box));
      return 0;
    };
  });

  // mms
  auto* mms = app.add_subcommand("mms", "Send MMS");
  mms->require_subcommand(1);
  auto* mms_send = mms->add_subcommand("send", "POST /v1/mms");
  std::vector<std::string> mms_to, mms_files;
  std::string mms_subject, mms_text;
  mms_send->add_option("--to", mms_to)->required();
  mms_send->add_option("--subject", mms_subject);
  mms_send->add_option("--text", mms_text, "text/plain part");
  mms_send->add_option("--file", mms_files, "Media part; type from the extension")->check(CLI::ExistingFile);
  mms_send->callback([&] {
    action = [&] {
      json parts = json::array();
      if (!mms_text.empty()) parts.push_back({{"content_type", "text/plain"}, {"text", mms_text}});
      for (const auto& f : mms_files) {
        auto data = read_file(f);
        parts.push_back({{"content_type", gateway::guess_content_type(f)},
                         {"content_id", "<" + std::filesystem::path(f).filename().string() + ">"},
                         {"data", base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()))}});
      }
      json body = {{"to", mms_to}, {"parts", parts}};
      if (!mms_subject.empty()) body["subject"] = mms_subject;
      emit(out, g, Api(g).call("POST", "/v1/mms", body));
      return 0;
    };
  });

  // call
  auto* callc = app.add_subcommand("call", "Voice calls");
  callc->require_subcommand(1);
  auto* dial = callc->add_subcommand("dial", "POST /v1/calls");
  std::string dial_to, dial_rtp, call_id;
  dial->add_option("--to", dial_to)->required();
  dial->add_option("--rtp", dial_rtp, "addr:port of the RTP peer");
  dial->callback([&] {
    action = [&] {
      json body = {{"to", dial_to}};
      if (!dial_rtp.empty()) {
        auto colon = dial_rtp.rfind(':');
        auto port = colon == std::string::npos ? std::nullopt : parse_int(dial_rtp.substr(colon + 1));
        if (!port) throw CLI::ValidationError("--rtp", "expected addr:port");
        body["rtp"] = {{"addr", dial_rtp.substr(0, colon)}, {"port", *port}};
      }
      emit(out, g, Api(g).call("POST", "/v1/calls", body));
      return 0;
    };
  });
  for (const auto* verb : {"answer", "hangup", "status"}) {
    auto* sub = callc->add_subcommand(verb, std::string(verb) + " a call");
    sub->add_option("id", call_id)->required();
    std::string v = verb;
    sub->callback([&, v] {
      action = [&, v] {
        auto path = "/v1/calls/" + url_encode(call_id);
        emit(out, g, v == "status" ? Api(g).call("GET", path) : Api(g).call("POST", path + "/" + v, json::object()));
        return 0;
      };
    });
  }

  // phonebook
  auto* pb = app.add_subcommand("phonebook", "SIM phonebook");
  pb->require_subcommand(1);
  auto* pb_list = pb->add_subcommand("list", "GET /v1/phonebook");
  pb_list->callback([&] {
    action = [&] {
      auto j = Api(g).call("GET", "/v1/phonebook");
      emit(out, g, g.pretty ? j.at("entries") : j);
      return 0;
    };
  });
  auto* pb_add = pb->add_subcommand("add", "PUT /v1/phonebook[/{index}]");
  std::string pb_number, pb_text;
  int pb_index = 0;
  pb_add->add_option("--number", pb_number)->required();
  pb_add->add_option("--text", pb_text)->required();
  pb_add->add_option("--index", pb_index, "Slot; first free when omitted")->check(CLI::NonNegativeNumber);
  pb_add->callback([&] {
    action = [&] {
      json body = {{"number", pb_number}, {"text", pb_text}};
      auto path = pb_index > 0 ? "/v1/phonebook/" + std::to_string(pb_index) : std::string("/v1/phonebook");
      emit(out, g, Api(g).call("PUT", path, body));
      return 0;
    };
  });
  auto* pb_find = pb->add_subcommand("find", "GET /v1/phonebook?find=");
  std::string pb_prefix;
  pb_find->add_option("prefix", pb_prefix)->required();
  pb_find->callback([&] {
    action = [&] {
      auto j = Api(g).call("GET", "/v1/phonebook?find=" + url_encode(pb_prefix));
      emit(out, g, g.pretty ? j.at("entries") : j);
      return 0;
    };
  });

  // events
  auto* ev = app.add_subcommand("events", "Stream GET /v1/events, one JSON line per event");
  std::uint64_t ev_last = 0;
  int ev_count = 0;
  double ev_timeout = 0;
  ev->add_option("--last-event-id", ev_last, "Resume after this seq");
  ev->add_option("--count", ev_count, "Stop after this many events")->check(CLI::NonNegativeNumber);
  ev->add_option("--timeout", ev_timeout, "Stop after this many seconds")->check(CLI::NonNegativeNumber);
  ev->callback([&] {
    action = [&] {
      httplib::Client cli(g.url);
      cli.set_connection_timeout(5);
      cli.set_read_timeout(1);
      httplib::Headers h{{"Authorization", "Bearer " + g.token}};
      auto deadline = ev_timeout > 0 ? std::chrono::steady_clock::now() +
                                           std::chrono::milliseconds(static_cast<long>(ev_timeout * 1000))
                                     : std::chrono::steady_clock::time_point::max();
      int seen = 0;
      std::string pending;
      std::uint64_t last = ev_last;
      auto done = [&] {
        return g_shutdown || (ev_count > 0 && seen >= ev_count) || std::chrono::steady_clock::now() >= deadline;
      };
      while (!done()) {
        auto headers = h;
        if (last > 0) headers.emplace("Last-Event-ID", std::to_string(last));
        int status = 0;
        auto res = cli.Get(
            "/v1/events", headers,
            [&](const httplib::Response& r) {
              status = r.status;
              return r.status == 200;
            },
            [&](const char* data, std::size_t len) {
              pending.append(data, len);
              std::size_t pos;
              while ((pos = pending.find("\n\n")) != std::string::npos) {
                auto block = pending.substr(0, pos);
                pending.erase(0, pos + 2);
                for (const auto& line : split(block, '\n')) {
                  if (!line.starts_with("data: ")) continue;
                  auto e = json::parse(line.substr(6));
                  last = e.value("seq", last);
                  emit(out, g, e);
                  ++seen;
                }
                if (done()) return false;
              }
              return !done();
            });
        if (status == 401) throw RunError("HTTP 401 unauthorized");
        if (status != 0 && status != 200) throw RunError("HTTP " + std::to_string(status));
        if (!res && res.error() == httplib::Error::Connection) {
          throw RunError("cannot reach " + g.url + ": " + httplib::to_string(res.error()));
        }
        pending.clear();
      }
      return 0;
    };
  });

  // status
  auto* status = app.add_subcommand("status", "GET /v1/modem/status");
  status->callback([&] {
    action = [&] {
      emit(out, g, Api(g).call("GET", "/v1/modem/status"));
      return 0;
    };
  });

  // pdu
  auto* pdu = app.add_subcommand("pdu", "Offline SMS PDU codec");
  pdu->require_subcommand(1);
  auto* pdu_enc = pdu->add_subcommand("encode", "SMS-SUBMIT JSON or flags -> PDU hex");
  std::string pe_to, pe_text, pe_json, pe_alphabet;
  int pe_validity = -1;
  pdu_enc->add_option("--to", pe_to);
  pdu_enc->add_option("--text", pe_text);
  pdu_enc->add_option("--alphabet", pe_alphabet)->check(CLI::IsMember({"gsm7", "ucs2", "octet"}));
  pdu_enc->add_option("--validity", pe_validity, "Relative validity octet")->check(CLI::Range(0, 255));
  pdu_enc->add_option("--json", pe_json, "Submit as JSON (same shape as decode output)");
  pdu_enc->callback([&] {
    action = [&] {
      json spec;
      if (!pe_json.empty()) {
        spec = json::parse(pe_json);
      } else {
        if (pe_to.empty()) throw CLI::ValidationError("--to", "required without --json");
        spec = {{"to", pe_to}, {"text", pe_text}};
        if (!pe_alphabet.empty()) spec["alphabet"] = pe_alphabet;
        if (pe_validity >= 0) spec["validity_relative"] = pe_validity;
      }
      auto enc = sms::encode_submit(submit_from_json(spec));
      emit(out, g, {{"pdu", enc.hex}, {"tpdu_len", enc.tpdu_len}});
      return 0;
    };
  });
  auto* pdu_dec = pdu->add_subcommand("decode", "PDU hex -> JSON");
  std::string pd_hex;
  pdu_dec->add_option("hex", pd_hex)->required();
  pdu_dec->callback([&] {
    action = [&] {
      auto v = sms::decode_any(pd_hex);
      emit(out, g, std::visit([](const auto& m) { return to_json(m); }, v));
      return 0;
    };
  });

  // mmspdu
  auto* mp = app.add_subcommand("mmspdu", "Offline MMS PDU codec");
  mp->require_subcommand(1);
  auto* mp_enc = mp->add_subcommand("encode", "MMS JSON -> hex");
  std::string mp_json;
  mp_enc->add_option("json", mp_json, "PDU as JSON; '-' reads stdin")->required();
  mp_enc->callback([&] {
    action = [&] {
      std::string text = mp_json;
      if (text == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
      }
      auto bytes = mms::encode_pdu(mms_pdu_from_json(json::parse(text)));
      emit(out, g, {{"hex", to_hex(bytes)}, {"length", bytes.size()}});
      return 0;
    };
  });
  auto* mp_dec = mp->add_subcommand("decode", "hex -> MMS JSON");
  std::string mp_hex;
  mp_dec->add_option("hex", mp_hex)->required();
  mp_dec->callback([&] {
    action = [&] {
      emit(out, g, to_json(mms::decode_pdu(from_hex(mp_hex))));
      return 0;
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Latency of one API call over a kept-alive connection");
  std::size_t bench_n = 1000;
  std::string bench_path = "/v1/modem/status";
  bench->add_option("-n,--n", bench_n, "Timed requests");
  bench->add_option("--path", bench_path);
  bench->callback([&] {
    action = [&] {
      auto report = gateway::measure_latency(g.url, bench_path, g.token, bench_n);
      if (g.pretty) {
        out << report.table();
      } else {
        out << report.to_json().dump() << '\n';
      }
      return 0;
    };
  });

  std::vector<std::string> rev;
  for (auto it = argv.rbegin(); it != argv.rend() && std::next(it) != argv.rend(); ++it) rev.push_back(*it);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return 2;
  }
  if (!action) {
    err << "usage error: no command\n";
    return 2;
  }
  bool offline = pdu->parsed() || mp->parsed() || serve->parsed() || simc->parsed();
  try {
    if (!offline) resolve_endpoint(g);
    return action();
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const RunError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cellgate::cli
