#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cellgate/gateway/gateway.hpp"

namespace cellgate::gateway {

// HTTP status for an error code.
int http_status(Errc code) noexcept;

std::string percent_decode(std::string_view s);
// "a=1&b=x%20y" -> {a:1, b:"x y"}
std::map<std::string, std::string> parse_query(std::string_view q);

// Thread-per-connection HTTP/1.1 server over the gateway: JSON routes, the SSE event
// stream and the call audio WebSocket.
class HttpServer {
 public:
  HttpServer(Gateway& gateway, std::string host, std::uint16_t port);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void start();
  void stop();
  std::uint16_t port() const noexcept { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  void accept_loop();
  void serve(int fd);
  void reap_locked();

  Gateway& gateway_;
  std::string host_;
  std::uint16_t port_;
  std::unique_ptr<Impl> impl_;
  std::atomic<bool> stop_{false};
  bool started_ = false;
  std::thread acceptor_;
  std::mutex mu_;
  std::set<int> open_fds_;
  std::vector<std::thread> sessions_;
  std::vector<std::thread::id> finished_;
};

}  // namespace cellgate::gateway
