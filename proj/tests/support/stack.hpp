#pragma once

// In-process gateway against the simulator, for tests that go through the wire.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "cellgate/gateway/gateway.hpp"
#include "cellgate/gateway/http_server.hpp"
#include "cellgate/sim/server.hpp"

namespace testsupport {

inline constexpr const char* kToken = "test-token-0123456789";

struct StackOptions {
  cellgate::sim::SimConfig sim;
  bool audio = true;
  std::string mmsc_url;
  std::optional<cellgate::gateway::SurveillanceConfig> surveillance;
  std::map<std::string, std::string> users;
  // Applied to the gateway config before it starts.
  std::function<void(cellgate::gateway::GatewayConfig&)> tweak;
};

struct Reply {
  int status = 0;  // 0 when no reply arrived
  std::string body;
  nlohmann::json json() const;
};

// A unique directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class TestStack {
 public:
  explicit TestStack(StackOptions options = {});
  ~TestStack();

  bool ready() const { return ready_; }
  cellgate::sim::ModemSim& sim() { return sim_server_->sim(); }
  cellgate::sim::SimServer& sim_server() { return *sim_server_; }
  cellgate::gateway::Gateway& gateway() { return *gateway_; }
  std::string base_url() const { return server_->base_url(); }
  std::uint16_t port() const { return server_->port(); }
  const std::filesystem::path& share_root() const { return share_.path(); }

  // Gateway REST with the bearer token. One client, so the connection is kept alive.
  Reply get(const std::string& path, const std::string& token = kToken);
  Reply post(const std::string& path, const nlohmann::json& body, const std::string& token = kToken);
  Reply post_raw(const std::string& path, const std::string& body, const std::string& content_type,
                 const std::string& token = kToken);
  Reply put(const std::string& path, const std::string& body, const std::string& content_type,
            const std::string& token = kToken);
  Reply del(const std::string& path, const std::string& token = kToken);

  // Simulator control plane.
  Reply ctl_get(const std::string& path);
  Reply ctl_post(const std::string& path, const nlohmann::json& body);

 private:
  TempDir share_;
  std::unique_ptr<cellgate::sim::SimServer> sim_server_;
  std::unique_ptr<cellgate::gateway::Gateway> gateway_;
  std::unique_ptr<cellgate::gateway::HttpServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::unique_ptr<httplib::Client> ctl_;
  std::mutex client_mu_;
  bool ready_ = false;
};

struct SseEvent {
  std::string id;
  std::string event;
  std::string data;
  std::chrono::steady_clock::time_point received;
  nlohmann::json payload() const;  // data parsed, then its "payload" member
};

// Follows /v1/events on a background thread, reconnecting with Last-Event-ID.
class SseReader {
 public:
  SseReader(std::string base_url, std::string token = kToken, std::optional<std::string> last_event_id = std::nullopt);
  ~SseReader();

  // Blocks until the stream's response headers arrived (or timeout).
  bool wait_connected(std::chrono::milliseconds timeout);
  // First event (in arrival order, from the start) that satisfies `pred`.
  std::optional<SseEvent> wait_for(const std::function<bool(const SseEvent&)>& pred, std::chrono::milliseconds timeout);
  std::vector<SseEvent> events() const;
  std::vector<std::string> comments() const;
  int connects() const { return connects_; }
  void stop();

 private:
  void run();
  void feed(const char* data, std::size_t n);

  std::string base_url_;
  std::string token_;
  std::string last_id_;
  std::atomic<bool> stop_{false};
  std::atomic<int> connects_{0};
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool connected_ = false;
  std::string buf_;
  SseEvent pending_;
  std::vector<SseEvent> events_;
  std::vector<std::string> comments_;
  std::shared_ptr<httplib::Client> client_;
  std::thread thread_;
};

// Polls `pred` every 5 ms until it holds or `timeout` passes.
bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds timeout);

}  // namespace testsupport
