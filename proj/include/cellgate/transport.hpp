#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace cellgate {

// Full-duplex byte stream. No framing is implied by the medium.
class ByteChannel {
 public:
  virtual ~ByteChannel() = default;

  // Blocks up to `timeout`; returns 0 when nothing arrived.
  // Throws Error(transport_closed) once the peer is gone.
  virtual std::size_t read(std::span<char> buf, std::chrono::milliseconds timeout) = 0;
  virtual void write(std::string_view data) = 0;
  virtual void close() noexcept = 0;
};

// Reads exactly buf.size() bytes or throws transport_closed / timeout.
void read_exact(ByteChannel& ch, std::span<char> buf, std::chrono::milliseconds timeout);

struct TransportSpec {
  enum class Kind { serial, tcp, memory };

  Kind kind = Kind::tcp;
  std::string path;  // serial device
  int baud = 115200;
  std::string host;
  std::uint16_t port = 0;
  std::string id;    // in-memory channel id

  // `serial:<path>?baud=115200`, `tcp:<host>:<port>`, `mem:<id>`
  static TransportSpec parse(std::string_view text);
  std::string to_string() const;
};

std::unique_ptr<ByteChannel> open_transport(const TransportSpec& spec);
inline std::unique_ptr<ByteChannel> open_transport(std::string_view text) {
  return open_transport(TransportSpec::parse(text));
}

std::unique_ptr<ByteChannel> tcp_connect(const std::string& host, std::uint16_t port,
                                         std::chrono::milliseconds timeout = std::chrono::seconds(5));
std::unique_ptr<ByteChannel> serial_open(const std::string& path, int baud);

class TcpListener {
 public:
  // port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  // nullptr on timeout or after close().
  std::unique_ptr<ByteChannel> accept(std::chrono::milliseconds timeout);
  void close() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>> make_memory_pair();

// Process-wide registry backing `mem:<id>` transports.
class MemoryHub {
 public:
  using Acceptor = std::function<void(std::unique_ptr<ByteChannel>)>;

  static MemoryHub& instance();

  void listen(const std::string& id, Acceptor acceptor);
  void unlisten(const std::string& id);
  // Throws Error(transport_closed) when nobody listens on `id`.
  std::unique_ptr<ByteChannel> connect(const std::string& id);

 private:
  struct Impl;
  MemoryHub();
  std::shared_ptr<Impl> impl_;
};

struct UdpEndpoint {
  std::string addr;
  std::uint16_t port = 0;
  bool operator==(const UdpEndpoint&) const = default;
};

class UdpSocket {
 public:
  UdpSocket(const std::string& host, std::uint16_t port);
  ~UdpSocket();
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  UdpEndpoint local() const { return local_; }
  void send_to(const UdpEndpoint& to, std::span<const std::uint8_t> data);
  // Returns 0 bytes on timeout.
  std::size_t recv_from(std::span<std::uint8_t> buf, std::chrono::milliseconds timeout,
                        UdpEndpoint* from = nullptr);
  void close() noexcept;

 private:
  int fd_ = -1;
  UdpEndpoint local_;
};

}  // namespace cellgate
