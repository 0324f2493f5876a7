#include "cellgate/mms/client.hpp"

#include <random>

#include <spdlog/spdlog.h>

#include "cellgate/error.hpp"
#include "httplib.h"

namespace cellgate::mms {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  auto path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

class HttplibLeg final : public MmsHttp {
 public:
  explicit HttplibLeg(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpReply post(const std::string& url, const Bytes& body) override {
    auto [base, path] = split_url(url);
    auto cli = client(base);
    auto res = cli.Post(path, reinterpret_cast<const char*>(body.data()), body.size(),
                        std::string(kMmsContentType));
    return reply(res, url);
  }

  HttpReply get(const std::string& url) override {
    auto [base, path] = split_url(url);
    auto cli = client(base);
    auto res = cli.Get(path);
    return reply(res, url);
  }

 private:
  httplib::Client client(const std::string& base) const {
    httplib::Client cli(base);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    return cli;
  }

  static HttpReply reply(const httplib::Result& res, const std::string& url) {
    if (!res) fail(Errc::http_failure, url + ": " + httplib::to_string(res.error()));
    return HttpReply{res->status, Bytes(res->body.begin(), res->body.end())};
  }

  std::chrono::milliseconds timeout_;
};

bool expired(const Expiry& e) {
  if (e.relative) return e.value == 0;
  auto now = std::chrono::duration_cast<std::chrono::seconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count();
  return e.value <= static_cast<std::uint64_t>(now);
}

}  // namespace

std::string_view to_string(TxState s) noexcept {
  switch (s) {
    case TxState::idle: return "idle";
    case TxState::send_req_sent: return "send_req_sent";
    case TxState::confirmed: return "confirmed";
    case TxState::failed: return "failed";
    case TxState::notified: return "notified";
    case TxState::notify_resp_sent: return "notify_resp_sent";
    case TxState::retrieving: return "retrieving";
    case TxState::retrieved: return "retrieved";
    case TxState::acknowledged: return "acknowledged";
  }
  return "?";
}

std::string_view to_string(Direction d) noexcept { return d == Direction::send ? "send" : "receive"; }

bool Transaction::terminal() const noexcept {
  return state == TxState::confirmed || state == TxState::failed || state == TxState::acknowledged ||
         state == TxState::retrieved;
}

std::unique_ptr<MmsHttp> make_http(std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibLeg>(timeout);
}

MmsClient::MmsClient(std::string mmsc_url, Options options)
    : MmsClient(std::move(mmsc_url), options, make_http(options.timeout)) {}

MmsClient::MmsClient(std::string mmsc_url, Options options, std::unique_ptr<MmsHttp> http)
    : url_(std::move(mmsc_url)), options_(options), http_(std::move(http)) {}

void MmsClient::set_observer(Observer observer) {
  std::lock_guard lk(mu_);
  observer_ = std::move(observer);
}

std::string MmsClient::new_transaction_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return std::string("T") + buf;
}

HttpReply MmsClient::with_retry(const std::function<HttpReply()>& leg) {
  for (int attempt = 0;; ++attempt) {
    try {
      auto r = leg();
      if (r.status >= 500 && attempt < options_.retries) continue;
      return r;
    } catch (const Error& e) {
      if (e.code() != Errc::http_failure || attempt >= options_.retries) throw;
      spdlog::debug("mms: retrying after {}", e.what());
    }
  }
}

void MmsClient::move_to(const std::string& id, TxState state, const std::string& failure) {
  Transaction copy;
  Observer obs;
  {
    std::lock_guard lk(mu_);
    auto& t = tx_.at(id);
    t.state = state;
    if (!failure.empty()) t.failure = failure;
    t.history.push_back({state, std::chrono::steady_clock::now()});
    if (t.message_id) by_message_id_[*t.message_id] = id;
    copy = t;
    obs = observer_;
  }
  spdlog::debug("mms {} {} -> {}", to_string(copy.direction), id, to_string(state));
  if (obs) obs(copy);
}

Transaction MmsClient::snapshot(const std::string& id) const {
  std::lock_guard lk(mu_);
  return tx_.at(id);
}

std::string MmsClient::send(Headers headers, Body body) {
  if (!headers.transaction_id) headers.transaction_id = new_transaction_id();
  const auto id = *headers.transaction_id;
  Pdu req{MessageType::m_send_req, std::move(headers), std::move(body)};
  auto wire = encode_pdu(req);  // validates before any state exists
  {
    std::lock_guard lk(mu_);
    if (tx_.count(id)) fail(Errc::conflict, "transaction " + id + " already exists");
    Transaction t;
    t.id = id;
    t.direction = Direction::send;
    t.message = req;
    t.history.push_back({TxState::idle, std::chrono::steady_clock::now()});
    tx_.emplace(id, std::move(t));
  }
  move_to(id, TxState::send_req_sent);
  try {
    auto r = with_retry([&] { return http_->post(url_, wire); });
    if (r.status / 100 != 2) fail(Errc::http_failure, "MMSC answered HTTP " + std::to_string(r.status));
    Pdu conf;
    try {
      conf = decode_pdu(r.body);
    } catch (const Error& e) {
      fail(Errc::decode_failure, std::string("m-send-conf: ") + e.what());
    }
    if (conf.type != MessageType::m_send_conf) {
      fail(Errc::decode_failure, "expected m-send-conf, got " + std::string(to_string(conf.type)));
    }
    auto status = conf.headers.response_status.value_or(response_status::error_unspecified);
    if (status != response_status::ok) fail(Errc::mmsc_status, response_status_name(status));
    if (!conf.headers.message_id) fail(Errc::decode_failure, "m-send-conf without Message-ID");
    {
      std::lock_guard lk(mu_);
      tx_.at(id).message_id = conf.headers.message_id;
    }
    move_to(id, TxState::confirmed);
    return *conf.headers.message_id;
  } catch (const Error& e) {
    move_to(id, TxState::failed, e.what());
    throw;
  }
}

std::optional<Transaction> MmsClient::handle_notification(std::span<const std::uint8_t> bytes) {
  Pdu n;
  try {
    n = decode_pdu(bytes);
    if (n.type != MessageType::m_notification_ind) fail(Errc::decode_failure, "not an m-notification-ind");
    validate(n);
  } catch (const Error& e) {
    spdlog::warn("mms: dropping notification: {}", e.what());
    return std::nullopt;
  }
  const auto id = *n.headers.transaction_id;
  {
    std::lock_guard lk(mu_);
    if (auto it = tx_.find(id); it != tx_.end()) return it->second;
    Transaction t;
    t.id = id;
    t.direction = Direction::receive;
    t.content_location = n.headers.content_location;
    t.history.push_back({TxState::idle, std::chrono::steady_clock::now()});
    tx_.emplace(id, std::move(t));
  }
  move_to(id, TxState::notified);
  if (expired(*n.headers.expiry)) {
    move_to(id, TxState::failed, "expired");
    return snapshot(id);
  }

  Pdu resp{MessageType::m_notifyresp_ind, {}, std::nullopt};
  resp.headers.transaction_id = id;
  resp.headers.status = Status::deferred;
  try {
    auto wire = encode_pdu(resp);
    auto r = with_retry([&] { return http_->post(url_, wire); });
    if (r.status / 100 != 2) fail(Errc::http_failure, "notify-resp answered HTTP " + std::to_string(r.status));
  } catch (const Error& e) {
    move_to(id, TxState::failed, e.what());
    return snapshot(id);
  }
  move_to(id, TxState::notify_resp_sent);
  if (options_.auto_retrieve) {
    try {
      return retrieve(id);
    } catch (const Error&) {
      return snapshot(id);
    }
  }
  return snapshot(id);
}

Transaction MmsClient::retrieve(const std::string& id) {
  std::string location;
  {
    std::lock_guard lk(mu_);
    auto it = tx_.find(id);
    if (it == tx_.end()) fail(Errc::not_found, "no transaction " + id);
    auto s = it->second.state;
    if (it->second.direction != Direction::receive ||
        (s != TxState::notified && s != TxState::notify_resp_sent)) {
      fail(Errc::invalid_state, "transaction " + id + " is " + std::string(to_string(s)));
    }
    location = *it->second.content_location;
  }
  move_to(id, TxState::retrieving);
  Pdu conf;
  try {
    auto r = with_retry([&] { return http_->get(location); });
    if (r.status == 404 || r.status == 410) fail(Errc::content_location_gone, "content-location-gone");
    if (r.status / 100 != 2) fail(Errc::http_failure, "retrieve answered HTTP " + std::to_string(r.status));
    try {
      conf = decode_pdu(r.body);
    } catch (const Error& e) {
      fail(Errc::decode_failure, std::string("m-retrieve-conf: ") + e.what());
    }
    if (conf.type != MessageType::m_retrieve_conf) {
      fail(Errc::decode_failure, "expected m-retrieve-conf, got " + std::string(to_string(conf.type)));
    }
  } catch (const Error& e) {
    move_to(id, TxState::failed, e.code() == Errc::content_location_gone ? "content-location-gone" : e.what());
    throw;
  }
  {
    std::lock_guard lk(mu_);
    auto& t = tx_.at(id);
    t.message = conf;
    t.message_id = conf.headers.message_id;
  }
  move_to(id, TxState::retrieved);

  // The relay asks for an acknowledgement by putting a transaction id in the conf.
  if (!conf.headers.transaction_id) return snapshot(id);
  Pdu ack{MessageType::m_acknowledge_ind, {}, std::nullopt};
  ack.headers.transaction_id = conf.headers.transaction_id;
  try {
    auto wire = encode_pdu(ack);
    auto r = with_retry([&] { return http_->post(url_, wire); });
    if (r.status / 100 != 2) fail(Errc::http_failure, "acknowledge answered HTTP " + std::to_string(r.status));
  } catch (const Error& e) {
    // The message is already in hand; the transaction stays retrieved.
    spdlog::warn("mms: acknowledge for {} failed: {}", id, e.what());
    return snapshot(id);
  }
  move_to(id, TxState::acknowledged);
  return snapshot(id);
}

std::optional<DeliveryReport> MmsClient::handle_delivery_ind(std::span<const std::uint8_t> bytes) {
  Pdu d;
  try {
    d = decode_pdu(bytes);
    if (d.type != MessageType::m_delivery_ind) fail(Errc::decode_failure, "not an m-delivery-ind");
    validate(d);
  } catch (const Error& e) {
    spdlog::warn("mms: dropping delivery report: {}", e.what());
    return std::nullopt;
  }
  DeliveryReport rep;
  rep.message_id = *d.headers.message_id;
  rep.status = *d.headers.status;
  rep.to = d.headers.to;
  std::lock_guard lk(mu_);
  if (auto it = by_message_id_.find(rep.message_id); it != by_message_id_.end()) rep.transaction_id = it->second;
  return rep;
}

std::optional<Transaction> MmsClient::find(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = tx_.find(id);
  if (it == tx_.end()) return std::nullopt;
  return it->second;
}

std::vector<Transaction> MmsClient::list() const {
  std::lock_guard lk(mu_);
  std::vector<Transaction> out;
  for (const auto& [id, t] : tx_) out.push_back(t);
  return out;
}

}  // namespace cellgate::mms
