#include "cellgate/gateway/http_server.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <deque>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "cellgate/at/engine.hpp"
#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate::gateway {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;
using namespace std::chrono_literals;

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::unauthorized:
      return 401;
    case Errc::not_found:
      return 404;
    case Errc::invalid_state:
    case Errc::modem_busy:
    case Errc::conflict:
      return 409;
    case Errc::content_location_gone:
    case Errc::expired:
      return 410;
    case Errc::storage_full:
      return 507;
    case Errc::not_ready:
    case Errc::capability_missing:
    case Errc::init_failed:
    case Errc::sim_pin_required:
    case Errc::sim_puk:
    case Errc::transport_closed:
    case Errc::timeout:
    case Errc::prompt_never_arrived:
      return 503;
    case Errc::command_failed:
    case Errc::http_failure:
    case Errc::mmsc_status:
      return 502;
    default:
      return 400;
  }
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      auto hex = std::string(s.substr(i + 1, 2));
      char* end = nullptr;
      long v = std::strtol(hex.c_str(), &end, 16);
      if (end == hex.c_str() + 2) {
        out.push_back(static_cast<char>(v));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i] == '+' ? ' ' : s[i]);
  }
  return out;
}

std::map<std::string, std::string> parse_query(std::string_view q) {
  std::map<std::string, std::string> out;
  for (const auto& pair : split(q, '&')) {
    if (pair.empty()) continue;
    auto eq = pair.find('=');
    if (eq == std::string::npos) {
      out[percent_decode(pair)] = "";
    } else {
      out[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
    }
  }
  return out;
}

namespace {

std::string_view sv(beast::string_view s) { return {s.data(), s.size()}; }

struct Call {
  const Request& req;
  std::vector<std::string> segs;  // decoded path segments
  std::map<std::string, std::string> query;
  std::string owner;
};

Response make_response(const Request& req, http::status status) {
  Response res{status, req.version()};
  res.set(http::field::server, "cellgate");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  return res;
}

Response json_response(const Request& req, int status, const json& body) {
  auto res = make_response(req, static_cast<http::status>(status));
  res.set(http::field::content_type, "application/json");
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

Response empty_response(const Request& req, int status) {
  auto res = make_response(req, static_cast<http::status>(status));
  res.prepare_payload();
  return res;
}

Response error_response(const Request& req, int status, std::string_view code, std::string_view message) {
  auto res = json_response(req, status, {{"error", code}, {"message", message}});
  if (status == 401) res.set(http::field::www_authenticate, "Bearer");
  return res;
}

json body_json(const Request& req) {
  if (req.body().empty()) return json::object();
  try {
    return json::parse(req.body());
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("body is not JSON: ") + e.what());
  }
}

int index_arg(const std::string& s) {
  auto v = parse_int(s);
  if (!v || *v < 0 || *v > 100000) fail(Errc::invalid_argument, "bad index " + s);
  return static_cast<int>(*v);
}

std::string bearer(const Request& req, const std::map<std::string, std::string>& query) {
  auto h = sv(req[http::field::authorization]);
  if (starts_with_icase(h, "Bearer ")) return std::string(trim(h.substr(7)));
  // Browsers cannot set headers on a WebSocket handshake.
  if (auto it = query.find("token"); it != query.end()) return it->second;
  return {};
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

struct HttpServer::Impl {
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
};

HttpServer::HttpServer(Gateway& gateway, std::string host, std::uint16_t port)
    : gateway_(gateway), host_(std::move(host)), port_(port), impl_(std::make_unique<Impl>()) {}

HttpServer::~HttpServer() { stop(); }

std::string HttpServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void HttpServer::start() {
  if (started_) return;
  started_ = true;
  tcp::endpoint ep(net::ip::make_address(host_), port_);
  auto& a = impl_->acceptor;
  a.open(ep.protocol());
  a.set_option(net::socket_base::reuse_address(true));
  a.bind(ep);
  a.listen(net::socket_base::max_listen_connections);
  port_ = a.local_endpoint().port();
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("gateway: HTTP API on {}", base_url());
}

void HttpServer::stop() {
  if (!started_ || stop_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  boost::system::error_code ec;
  impl_->acceptor.close(ec);
  std::vector<std::thread> sessions;
  {
    std::lock_guard lk(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    sessions.swap(sessions_);
  }
  for (auto& t : sessions) {
    if (t.joinable()) t.join();
  }
}

void HttpServer::reap_locked() {
  for (auto id : finished_) {
    auto it = std::find_if(sessions_.begin(), sessions_.end(), [&](const std::thread& t) { return t.get_id() == id; });
    if (it == sessions_.end()) continue;
    it->join();
    sessions_.erase(it);
  }
  finished_.clear();
}

void HttpServer::accept_loop() {
  int lfd = impl_->acceptor.native_handle();
  while (!stop_) {
    pollfd p{lfd, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    int fd = ::accept4(lfd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    std::lock_guard lk(mu_);
    reap_locked();
    open_fds_.insert(fd);
    sessions_.emplace_back([this, fd] { serve(fd); });
  }
}

namespace {

class Router {
 public:
  Router(Gateway& gw, std::atomic<bool>& stop) : gw_(gw), stop_(stop) {}

  // Returns nullopt when the request took over the socket (SSE, WebSocket).
  std::optional<Response> handle(const Request& req, tcp::socket& sock, beast::flat_buffer& buffer);

 private:
  Response route(Call& c);
  Response share(Call& c);
  void events(const Request& req, const std::map<std::string, std::string>& query, tcp::socket& sock);
  void audio(const Request& req, const std::string& id, tcp::socket& sock, beast::flat_buffer& buffer);

  Gateway& gw_;
  std::atomic<bool>& stop_;
};

std::optional<Response> Router::handle(const Request& req, tcp::socket& sock, beast::flat_buffer& buffer) {
  std::string_view target = sv(req.target());
  auto qmark = target.find('?');
  Call c{req, {}, {}, {}};
  if (qmark != std::string_view::npos) c.query = parse_query(target.substr(qmark + 1));
  auto path = target.substr(0, qmark);
  for (const auto& seg : split(path, '/')) {
    if (!seg.empty()) c.segs.push_back(percent_decode(seg));
  }
  // Keep "/v1/share/x/" style trailing parts visible to the share validator.
  bool trailing_slash = path.size() > 1 && path.back() == '/';

  if (req.method() == http::verb::options) {
    auto res = empty_response(req, 204);
    res.set(http::field::access_control_allow_methods, "GET, POST, PUT, DELETE, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Authorization, Content-Type, Last-Event-ID");
    return res;
  }
  if (c.segs.size() == 1 && c.segs[0] == "healthz") {
    return json_response(req, 200, {{"status", "ok"}, {"modem_ready", gw_.ready()}});
  }
  auto owner = gw_.owner_for_token(bearer(req, c.query));
  if (!owner) return error_response(req, 401, "unauthorized", "missing or invalid bearer token");
  c.owner = *owner;

  try {
    if (c.segs.size() == 2 && c.segs[0] == "v1" && c.segs[1] == "events" && req.method() == http::verb::get) {
      events(req, c.query, sock);
      return std::nullopt;
    }
    if (c.segs.size() == 4 && c.segs[0] == "v1" && c.segs[1] == "calls" && c.segs[3] == "audio") {
      if (!websocket::is_upgrade(req)) return error_response(req, 400, "invalid_argument", "WebSocket upgrade required");
      audio(req, c.segs[2], sock, buffer);
      return std::nullopt;
    }
    if (trailing_slash && c.segs.size() >= 3 && c.segs[1] == "share") c.segs.push_back("");
    return route(c);
  } catch (const Error& e) {
    return error_response(req, http_status(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(req, 400, "invalid_argument", e.what());
  } catch (const std::exception& e) {
    spdlog::error("gateway: {} {} failed: {}", std::string(req.method_string()), std::string(req.target()), e.what());
    return error_response(req, 500, "internal", e.what());
  }
}

Response Router::route(Call& c) {
  const auto& req = c.req;
  const auto& s = c.segs;
  const auto m = req.method();
  const bool get = m == http::verb::get, post = m == http::verb::post, put = m == http::verb::put,
             del = m == http::verb::delete_;
  auto method_not_allowed = [&] { return error_response(req, 405, "method_not_allowed", "method not allowed"); };
  auto not_found = [&] { return error_response(req, 404, "not_found", "no such route"); };
  if (s.empty() || s[0] != "v1" || s.size() < 2) return not_found();
  const auto& area = s[1];
  const auto n = s.size();

  if (area == "modem" && n == 3 && s[2] == "status") {
    return get ? json_response(req, 200, gw_.modem_status()) : method_not_allowed();
  }
  if (area == "services") {
    if (n == 2) {
      if (get) return json_response(req, 200, gw_.services());
      if (post) {
        auto b = body_json(req);
        Gateway::PersonalizedService svc;
        svc.name = b.at("name").get<std::string>();
        if (svc.name.empty()) fail(Errc::invalid_argument, "service name is required");
        svc.description = b.value("description", std::string());
        svc.requires_services = b.value("requires", std::vector<std::string>{});
        gw_.register_service(svc);
        return json_response(req, 201, {{"name", svc.name}});
      }
      return method_not_allowed();
    }
    if (s[2] == "surveillance") {
      if (n == 3) {
        if (get) return json_response(req, 200, gw_.surveillance());
        if (put) return json_response(req, 200, gw_.set_surveillance(body_json(req)));
        return method_not_allowed();
      }
      if (n == 4 && s[3] == "motion") {
        return post ? json_response(req, 202, gw_.motion(body_json(req))) : method_not_allowed();
      }
    }
    return not_found();
  }
  if (area == "sms" && n == 2) {
    if (post) return json_response(req, 202, gw_.sms_send(body_json(req)));
    if (get) {
      auto box = c.query.count("box") ? c.query.at("box") : std::string("inbox");
      auto store = c.query.count("store") ? c.query.at("store") : std::string("SM");
      return json_response(req, 200, gw_.sms_list(box, store));
    }
    return method_not_allowed();
  }
  if (area == "mms") {
    if (n == 2) return post ? json_response(req, 202, gw_.mms_send(body_json(req))) : method_not_allowed();
    if (n == 3 && s[2] == "notification") {
      if (!post) return method_not_allowed();
      const auto& b = req.body();
      gw_.mms_push(std::span(reinterpret_cast<const std::uint8_t*>(b.data()), b.size()));
      return empty_response(req, 204);
    }
    if (n == 3) return get ? json_response(req, 200, gw_.mms_get(s[2])) : method_not_allowed();
    return not_found();
  }
  if (area == "calls") {
    if (n == 2) {
      if (post) return json_response(req, 201, gw_.call_dial(body_json(req)));
      if (get) return json_response(req, 200, gw_.calls_list());
      return method_not_allowed();
    }
    if (n == 3) return get ? json_response(req, 200, gw_.call_get(s[2])) : method_not_allowed();
    if (n == 4 && s[3] == "answer") {
      return post ? json_response(req, 200, gw_.call_answer(s[2], body_json(req))) : method_not_allowed();
    }
    if (n == 4 && s[3] == "hangup") {
      return post ? json_response(req, 200, gw_.call_hangup(s[2])) : method_not_allowed();
    }
    return not_found();
  }
  if (area == "phonebook") {
    if (n == 2) {
      if (get) {
        std::optional<std::string> find;
        if (auto it = c.query.find("find"); it != c.query.end()) find = it->second;
        return json_response(req, 200, gw_.phonebook_list(find));
      }
      if (put || post) return json_response(req, 201, gw_.phonebook_put(std::nullopt, body_json(req)));
      return method_not_allowed();
    }
    if (n == 3) {
      int index = index_arg(s[2]);
      if (get) return json_response(req, 200, gw_.phonebook_get(index));
      if (put) return json_response(req, 200, gw_.phonebook_put(index, body_json(req)));
      if (del) {
        gw_.phonebook_delete(index);
        return empty_response(req, 204);
      }
      return method_not_allowed();
    }
    return not_found();
  }
  if (area == "snapshot" && n == 2) return get ? json_response(req, 200, gw_.snapshot(c.owner)) : method_not_allowed();
  if (area == "sync" && n == 2) return post ? json_response(req, 200, gw_.sync(body_json(req))) : method_not_allowed();
  if (area == "share") return share(c);
  return not_found();
}

Response Router::share(Call& c) {
  const auto& req = c.req;
  const auto& s = c.segs;
  if (s.size() < 3) return error_response(req, 404, "not_found", "no such route");
  const auto& owner = s[2];
  if (!valid_owner(owner)) fail(Errc::invalid_argument, "invalid share owner");
  if (s.size() == 3) {
    if (req.method() != http::verb::get) return error_response(req, 405, "method_not_allowed", "method not allowed");
    json out = json::array();
    for (const auto& e : gw_.shares().list(owner)) out.push_back(to_json(e));
    return json_response(req, 200, out);
  }
  std::string path;
  for (std::size_t i = 3; i < s.size(); ++i) {
    if (i > 3) path += '/';
    path += s[i];
  }
  if (!valid_share_path(path)) fail(Errc::invalid_argument, "invalid share path");
  if (req.method() == http::verb::get) {
    auto hit = gw_.shares().get(owner, path);
    if (!hit) fail(Errc::not_found, "no shared file " + owner + "/" + path);
    auto res = make_response(req, http::status::ok);
    res.set(http::field::content_type, hit->first.content_type);
    res.set("X-Updated-At", hit->first.updated_at);
    res.body() = std::move(hit->second);
    res.prepare_payload();
    return res;
  }
  if (req.method() == http::verb::put) {
    if (owner != c.owner) return error_response(req, 403, "forbidden", "only " + owner + " may write this space");
    std::string type(req[http::field::content_type]);
    auto entry = gw_.shares().put(owner, path, req.body(), type);
    return json_response(req, 201, to_json(entry));
  }
  return error_response(req, 405, "method_not_allowed", "method not allowed");
}

void Router::events(const Request& req, const std::map<std::string, std::string>& query, tcp::socket& sock) {
  auto& bus = gw_.events();
  std::uint64_t last = bus.last_seq();
  std::string resume(req["Last-Event-ID"]);
  if (resume.empty() && query.count("last_event_id")) resume = query.at("last_event_id");
  if (!resume.empty()) {
    auto v = parse_int(resume);
    if (!v || *v < 0) fail(Errc::invalid_argument, "bad Last-Event-ID");
    last = static_cast<std::uint64_t>(*v);
  }
  int fd = sock.native_handle();
  std::string head =
      "HTTP/1.1 200 OK\r\nContent-Type: text/event-stream\r\nCache-Control: no-cache\r\n"
      "Access-Control-Allow-Origin: *\r\nConnection: close\r\n\r\nretry: 1000\n\n";
  auto first = bus.first_retained();
  if (!resume.empty() && first > last + 1) head += ": gap " + std::to_string(last + 1) + "-" + std::to_string(first - 1) + "\n\n";
  if (!send_all(fd, head)) return;
  auto idle_since = std::chrono::steady_clock::now();
  while (!stop_ && !bus.closed()) {
    auto batch = bus.wait(last, 500ms);
    std::string out;
    for (const auto& e : batch) {
      out += e.to_sse();
      last = e.seq;
    }
    auto now = std::chrono::steady_clock::now();
    if (out.empty() && now - idle_since > 5s) out = ": keepalive\n\n";
    if (out.empty()) continue;
    idle_since = now;
    if (!send_all(fd, out)) return;
  }
}

void Router::audio(const Request& req, const std::string& id, tcp::socket& sock, beast::flat_buffer& buffer) {
  std::shared_ptr<call::AudioTap> tap;
  try {
    tap = gw_.open_audio(id);
  } catch (const Error& e) {
    auto res = error_response(req, http_status(e.code()), to_string(e.code()), e.what());
    res.keep_alive(false);
    boost::system::error_code ec;
    http::write(sock, res, ec);
    return;
  }
  auto& ioc = static_cast<net::io_context&>(sock.get_executor().context());
  websocket::stream<tcp::socket&> ws(sock);
  ws.binary(true);
  boost::system::error_code ec;
  ws.accept(req, ec);
  if (ec) {
    tap->close();
    return;
  }
  spdlog::info("gateway: audio relay open for {}", id);
  bool done = false;
  bool writing = false;
  std::deque<std::string> outq;
  beast::flat_buffer in;
  net::steady_timer timer(ioc);

  std::function<void()> write_next = [&] {
    if (writing || outq.empty() || done) return;
    writing = true;
    ws.async_write(net::buffer(outq.front()), [&](boost::system::error_code wec, std::size_t) {
      writing = false;
      outq.pop_front();
      if (wec) {
        done = true;
        timer.cancel();
        return;
      }
      write_next();
    });
  };
  std::function<void()> read_next = [&] {
    ws.async_read(in, [&](boost::system::error_code rec, std::size_t) {
      if (rec) {
        done = true;
        timer.cancel();
        return;
      }
      auto data = in.data();
      auto* p = static_cast<const std::uint8_t*>(data.data());
      Bytes frame(p, p + data.size());
      in.consume(in.size());
      if (!frame.empty() && frame.size() % 2 == 0) tap->send(std::move(frame));
      read_next();
    });
  };
  std::function<void()> tick = [&] {
    if (done) return;
    while (auto f = tap->next(0ms)) {
      if (outq.size() < 50) outq.emplace_back(f->begin(), f->end());
    }
    write_next();
    if (tap->closed() || stop_) {
      done = true;
      ws.async_close(websocket::close_code::normal, [](boost::system::error_code) {});
      return;
    }
    timer.expires_after(5ms);
    timer.async_wait([&](boost::system::error_code tec) {
      if (!tec) tick();
    });
  };
  (void)buffer;
  read_next();
  tick();
  ioc.restart();
  ioc.run();
  tap->close();
  spdlog::info("gateway: audio relay closed for {}", id);
}

}  // namespace

void HttpServer::serve(int fd) {
  net::io_context ioc;
  tcp::socket sock(ioc);
  boost::system::error_code ec;
  sock.assign(tcp::v4(), fd, ec);
  if (ec) {
    ::close(fd);
  } else {
    sock.set_option(tcp::no_delay(true), ec);
    Router router(gateway_, stop_);
    beast::flat_buffer buffer;
    while (!stop_) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(32 * 1024 * 1024);
      http::read(sock, buffer, parser, ec);
      if (ec) break;
      auto req = parser.release();
      auto res = router.handle(req, sock, buffer);
      if (!res) break;
      http::write(sock, *res, ec);
      if (ec || !res->keep_alive()) break;
    }
    sock.shutdown(tcp::socket::shutdown_both, ec);
  }
  std::lock_guard lk(mu_);
  open_fds_.erase(fd);
  sock.close(ec);
  finished_.push_back(std::this_thread::get_id());
}

}  // namespace cellgate::gateway
