#include "stack.hpp"

#include <random>

namespace testsupport {

using nlohmann::json;
using namespace std::chrono_literals;

json Reply::json() const { return body.empty() ? nlohmann::json() : nlohmann::json::parse(body); }

TempDir::TempDir() {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / ("cellgate-test-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

TestStack::TestStack(StackOptions options) {
  auto sim = std::make_shared<cellgate::sim::ModemSim>(options.sim);
  sim_server_ = std::make_unique<cellgate::sim::SimServer>(sim, cellgate::sim::SimServerOptions{});
  sim_server_->start();

  cellgate::gateway::GatewayConfig cfg;
  cfg.transport = sim_server_->at_transport();
  cfg.auth_token = kToken;
  cfg.share_root = share_.path().string();
  cfg.mmsc_url = options.mmsc_url;
  cfg.surveillance = options.surveillance;
  cfg.users = options.users;
  cfg.listen_port = 0;
  if (options.audio) cfg.audio_transport = sim_server_->audio_transport();
  if (options.tweak) options.tweak(cfg);
  gateway_ = std::make_unique<cellgate::gateway::Gateway>(cfg);
  gateway_->start();
  server_ = std::make_unique<cellgate::gateway::HttpServer>(*gateway_, "127.0.0.1", 0);
  server_->start();
  ready_ = gateway_->wait_ready(10s);

  client_ = std::make_unique<httplib::Client>(server_->base_url());
  client_->set_keep_alive(true);
  client_->set_read_timeout(10, 0);
  ctl_ = std::make_unique<httplib::Client>(sim_server_->ctl_url());
  ctl_->set_read_timeout(10, 0);
}

TestStack::~TestStack() {
  client_.reset();
  ctl_.reset();
  server_->stop();
  gateway_->stop();
  sim_server_->stop();
}

namespace {

Reply wrap(const httplib::Result& r) {
  if (!r) return {};
  return {r->status, r->body};
}

httplib::Headers auth(const std::string& token) {
  if (token.empty()) return {};
  return {{"Authorization", "Bearer " + token}};
}

}  // namespace

Reply TestStack::get(const std::string& path, const std::string& token) {
  std::lock_guard lock(client_mu_);
  return wrap(client_->Get(path, auth(token)));
}

Reply TestStack::post(const std::string& path, const nlohmann::json& body, const std::string& token) {
  return post_raw(path, body.dump(), "application/json", token);
}

Reply TestStack::post_raw(const std::string& path, const std::string& body, const std::string& content_type,
                          const std::string& token) {
  std::lock_guard lock(client_mu_);
  return wrap(client_->Post(path, auth(token), body, content_type));
}

Reply TestStack::put(const std::string& path, const std::string& body, const std::string& content_type,
                     const std::string& token) {
  std::lock_guard lock(client_mu_);
  return wrap(client_->Put(path, auth(token), body, content_type));
}

Reply TestStack::del(const std::string& path, const std::string& token) {
  std::lock_guard lock(client_mu_);
  return wrap(client_->Delete(path, auth(token)));
}

Reply TestStack::ctl_get(const std::string& path) { return wrap(ctl_->Get(path)); }

Reply TestStack::ctl_post(const std::string& path, const nlohmann::json& body) {
  return wrap(ctl_->Post(path, body.dump(), "application/json"));
}

json SseEvent::payload() const {
  auto j = json::parse(data, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return json();
  return j.value("payload", json());
}

SseReader::SseReader(std::string base_url, std::string token, std::optional<std::string> last_event_id)
    : base_url_(std::move(base_url)), token_(std::move(token)), last_id_(last_event_id.value_or("")) {
  thread_ = std::thread([this] { run(); });
}

SseReader::~SseReader() { stop(); }

void SseReader::stop() {
  stop_ = true;
  {
    std::lock_guard lock(mu_);
    if (client_) client_->stop();
  }
  if (thread_.joinable()) thread_.join();
}

void SseReader::run() {
  while (!stop_) {
    auto cli = std::make_shared<httplib::Client>(base_url_);
    // The server sends a keepalive comment every 5 s, so a read timeout means a dead stream.
    cli->set_read_timeout(15, 0);
    cli->set_connection_timeout(2, 0);
    httplib::Headers headers = auth(token_);
    {
      std::lock_guard lock(mu_);
      if (stop_) break;
      client_ = cli;
      if (!last_id_.empty()) headers.emplace("Last-Event-ID", last_id_);
      buf_.clear();
      pending_ = {};
    }
    // Any failure ends the request; the loop reconnects from the last id seen.
    cli->Get(
        "/v1/events", headers,
        [this](const httplib::Response& res) {
          if (res.status != 200) return false;
          ++connects_;
          std::lock_guard lock(mu_);
          connected_ = true;
          cv_.notify_all();
          return true;
        },
        [this](const char* data, std::size_t n) {
          feed(data, n);
          return !stop_.load();
        });
    {
      std::lock_guard lock(mu_);
      client_.reset();
    }
    if (!stop_) std::this_thread::sleep_for(10ms);
  }
}

void SseReader::feed(const char* data, std::size_t n) {
  auto now = std::chrono::steady_clock::now();
  std::lock_guard lock(mu_);
  buf_.append(data, n);
  std::size_t pos;
  while ((pos = buf_.find('\n')) != std::string::npos) {
    std::string line = buf_.substr(0, pos);
    buf_.erase(0, pos + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!pending_.event.empty() || !pending_.data.empty()) {
        pending_.received = now;
        if (!pending_.id.empty()) last_id_ = pending_.id;
        events_.push_back(pending_);
        cv_.notify_all();
      }
      pending_ = {};
      continue;
    }
    if (line[0] == ':') {
      comments_.push_back(line.substr(1));
      continue;
    }
    auto colon = line.find(':');
    std::string field = line.substr(0, colon);
    std::string value = colon == std::string::npos ? "" : line.substr(colon + 1);
    if (!value.empty() && value[0] == ' ') value.erase(0, 1);
    if (field == "id") pending_.id = value;
    else if (field == "event") pending_.event = value;
    else if (field == "data") pending_.data += (pending_.data.empty() ? "" : "\n") + value;
  }
}

bool SseReader::wait_connected(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return connected_; });
}

std::optional<SseEvent> SseReader::wait_for(const std::function<bool(const SseEvent&)>& pred,
                                            std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  std::optional<SseEvent> hit;
  cv_.wait_for(lock, timeout, [&] {
    for (const auto& e : events_) {
      if (pred(e)) {
        hit = e;
        return true;
      }
    }
    return false;
  });
  return hit;
}

std::vector<SseEvent> SseReader::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<std::string> SseReader::comments() const {
  std::lock_guard lock(mu_);
  return comments_;
}

bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (pred()) return true;
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(5ms);
  }
}

}  // namespace testsupport
