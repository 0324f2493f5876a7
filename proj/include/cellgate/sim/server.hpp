#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cellgate/sim/modem_sim.hpp"
#include "cellgate/transport.hpp"

namespace httplib {
class Server;
}

namespace cellgate::sim {

// Overrides on top of the defaults: manufacturer, model, pin, pin_locked, signal, ber,
// registration, sms_capacity, phonebook_capacity, capabilities, remove_capabilities,
// dial_delay_ms, dial_outcome, ring_interval_ms, tone_hz, tone_ms, echo.
SimConfig sim_config_from_json(const nlohmann::json& j);

struct SimServerOptions {
  std::string host = "127.0.0.1";
  // 0 picks an ephemeral port.
  std::uint16_t at_port = 0;
  std::uint16_t ctl_port = 0;
  std::uint16_t audio_port = 0;
  // Also accept AT connections on `mem:<id>`.
  std::optional<std::string> mem_id;

  // AT on `port`, control on `port + 1`, audio on `port + 2`.
  static SimServerOptions from_base_port(const std::string& host, std::uint16_t port);
};

// Puts a ModemSim on the network: one AT stream at a time (a new connection replaces the
// previous one), the HTTP control plane and the PCM audio side channel.
class SimServer {
 public:
  SimServer(std::shared_ptr<ModemSim> sim, SimServerOptions options);
  ~SimServer();
  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  void start();
  void stop();

  std::uint16_t at_port() const noexcept { return at_port_; }
  std::uint16_t ctl_port() const noexcept { return ctl_port_; }
  std::uint16_t audio_port() const noexcept { return audio_port_; }
  std::string at_transport() const;
  std::string audio_transport() const;
  std::string ctl_url() const;
  ModemSim& sim() noexcept { return *sim_; }

 private:
  void attach(std::unique_ptr<ByteChannel> ch);
  void flush();
  void at_reader(std::shared_ptr<ByteChannel> ch);
  void audio_session(std::shared_ptr<ByteChannel> ch);
  void install_routes();

  std::shared_ptr<ModemSim> sim_;
  SimServerOptions options_;
  std::uint16_t at_port_ = 0, ctl_port_ = 0, audio_port_ = 0;
  std::unique_ptr<TcpListener> at_listener_;
  std::unique_ptr<TcpListener> audio_listener_;
  std::unique_ptr<httplib::Server> ctl_;

  std::mutex conn_mu_;
  std::shared_ptr<ByteChannel> conn_;
  std::vector<std::shared_ptr<ByteChannel>> audio_conns_;

  std::atomic<bool> stop_{false};
  bool started_ = false;
  std::mutex threads_mu_;
  std::vector<std::thread> threads_;
};

}  // namespace cellgate::sim
