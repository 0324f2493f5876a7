#include "cellgate/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>

#include "cellgate/error.hpp"
#include "cellgate/util.hpp"

namespace cellgate {

void read_exact(ByteChannel& ch, std::span<char> buf, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t got = 0;
  while (got < buf.size()) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) fail(Errc::timeout, "read_exact timed out");
    got += ch.read(buf.subspan(got), left);
  }
}

TransportSpec TransportSpec::parse(std::string_view text) {
  TransportSpec spec;
  auto colon = text.find(':');
  if (colon == std::string_view::npos) fail(Errc::invalid_argument, "transport needs a scheme: " + std::string(text));
  auto scheme = text.substr(0, colon);
  auto rest = text.substr(colon + 1);
  if (scheme == "serial") {
    spec.kind = Kind::serial;
    auto q = rest.find('?');
    spec.path = std::string(rest.substr(0, q));
    if (q != std::string_view::npos) {
      auto opts = rest.substr(q + 1);
      if (opts.rfind("baud=", 0) != 0) fail(Errc::invalid_argument, "unknown serial option");
      auto baud = parse_int(opts.substr(5));
      if (!baud || *baud <= 0) fail(Errc::invalid_argument, "bad baud rate");
      spec.baud = static_cast<int>(*baud);
    }
    if (spec.path.empty()) fail(Errc::invalid_argument, "serial transport needs a device path");
  } else if (scheme == "tcp") {
    spec.kind = Kind::tcp;
    auto pc = rest.rfind(':');
    if (pc == std::string_view::npos) fail(Errc::invalid_argument, "tcp transport needs host:port");
    spec.host = std::string(rest.substr(0, pc));
    auto port = parse_int(rest.substr(pc + 1));
    if (!port || *port <= 0 || *port > 65535) fail(Errc::invalid_argument, "bad tcp port");
    spec.port = static_cast<std::uint16_t>(*port);
    if (spec.host.empty()) fail(Errc::invalid_argument, "tcp transport needs a host");
  } else if (scheme == "mem") {
    spec.kind = Kind::memory;
    spec.id = std::string(rest);
    if (spec.id.empty()) fail(Errc::invalid_argument, "mem transport needs an id");
  } else {
    fail(Errc::invalid_argument, "unknown transport scheme: " + std::string(scheme));
  }
  return spec;
}

std::string TransportSpec::to_string() const {
  switch (kind) {
    case Kind::serial: return "serial:" + path + "?baud=" + std::to_string(baud);
    case Kind::tcp: return "tcp:" + host + ":" + std::to_string(port);
    case Kind::memory: return "mem:" + id;
  }
  return {};
}

namespace {

class FdChannel final : public ByteChannel {
 public:
  explicit FdChannel(int fd, bool is_socket) : fd_(fd), socket_(is_socket) {}
  ~FdChannel() override { close(); }

  std::size_t read(std::span<char> buf, std::chrono::milliseconds timeout) override {
    std::unique_lock lk(mu_);
    if (fd_ < 0) fail(Errc::transport_closed, "channel closed");
    int fd = fd_;
    lk.unlock();
    pollfd pfd{fd, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc == 0) return 0;
    if (rc < 0) {
      if (errno == EINTR) return 0;
      fail(Errc::transport_closed, std::strerror(errno));
    }
    ssize_t n = ::read(fd, buf.data(), buf.size());
    if (n > 0) return static_cast<std::size_t>(n);
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) return 0;
    fail(Errc::transport_closed, "peer closed the channel");
  }

  void write(std::string_view data) override {
    std::lock_guard wl(write_mu_);
    std::size_t off = 0;
    while (off < data.size()) {
      int fd;
      {
        std::lock_guard lk(mu_);
        fd = fd_;
      }
      if (fd < 0) fail(Errc::transport_closed, "channel closed");
      ssize_t n = socket_ ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                          : ::write(fd, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN) {
          pollfd pfd{fd, POLLOUT, 0};
          ::poll(&pfd, 1, 100);
          continue;
        }
        fail(Errc::transport_closed, std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void close() noexcept override {
    std::lock_guard lk(mu_);
    if (fd_ >= 0) {
      if (socket_) ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  std::mutex mu_;
  std::mutex write_mu_;
  int fd_;
  bool socket_;
};

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<char> data;
  bool closed = false;
};

class MemoryChannel final : public ByteChannel {
 public:
  MemoryChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryChannel() override { close(); }

  std::size_t read(std::span<char> buf, std::chrono::milliseconds timeout) override {
    std::unique_lock lk(in_->mu);
    in_->cv.wait_for(lk, timeout, [&] { return !in_->data.empty() || in_->closed; });
    if (in_->data.empty()) {
      if (in_->closed) fail(Errc::transport_closed, "memory channel closed");
      return 0;
    }
    std::size_t n = std::min(buf.size(), in_->data.size());
    std::copy_n(in_->data.begin(), n, buf.begin());
    in_->data.erase(in_->data.begin(), in_->data.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void write(std::string_view data) override {
    std::lock_guard lk(out_->mu);
    if (out_->closed) fail(Errc::transport_closed, "memory channel closed");
    out_->data.insert(out_->data.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  void close() noexcept override {
    for (auto* p : {in_.get(), out_.get()}) {
      std::lock_guard lk(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
};

sockaddr_in resolve_v4(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (h.empty() || h == "*") h = "0.0.0.0";
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    fail(Errc::invalid_argument, "cannot resolve host " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

std::string addr_string(const sockaddr_in& addr) {
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return buf;
}

speed_t baud_constant(int baud) {
  switch (baud) {
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    case 460800: return B460800;
    case 921600: return B921600;
    default: fail(Errc::invalid_argument, "unsupported baud rate " + std::to_string(baud));
  }
}

}  // namespace

std::unique_ptr<ByteChannel> tcp_connect(const std::string& host, std::uint16_t port,
                                         std::chrono::milliseconds timeout) {
  auto addr = resolve_v4(host, port);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (fd < 0) fail(Errc::transport_closed, std::strerror(errno));
  int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  if (rc < 0 && errno == EINPROGRESS) {
    pollfd pfd{fd, POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    int err = 0;
    socklen_t len = sizeof err;
    if (rc <= 0 || ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) < 0 || err != 0) {
      ::close(fd);
      fail(Errc::transport_closed, "connect to " + host + ":" + std::to_string(port) + " failed");
    }
  } else if (rc < 0) {
    ::close(fd);
    fail(Errc::transport_closed, "connect to " + host + ":" + std::to_string(port) + " failed");
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdChannel>(fd, true);
}

std::unique_ptr<ByteChannel> serial_open(const std::string& path, int baud) {
  int fd = ::open(path.c_str(), O_RDWR | O_NOCTTY | O_CLOEXEC | O_NONBLOCK);
  if (fd < 0) fail(Errc::transport_closed, "open " + path + ": " + std::strerror(errno));
  termios tio{};
  if (::tcgetattr(fd, &tio) == 0) {
    ::cfmakeraw(&tio);
    auto speed = baud_constant(baud);
    ::cfsetispeed(&tio, speed);
    ::cfsetospeed(&tio, speed);
    tio.c_cflag |= CLOCAL | CREAD;
    ::tcsetattr(fd, TCSANOW, &tio);
  }
  return std::make_unique<FdChannel>(fd, false);
}

std::unique_ptr<ByteChannel> open_transport(const TransportSpec& spec) {
  switch (spec.kind) {
    case TransportSpec::Kind::serial: return serial_open(spec.path, spec.baud);
    case TransportSpec::Kind::tcp: return tcp_connect(spec.host, spec.port);
    case TransportSpec::Kind::memory: return MemoryHub::instance().connect(spec.id);
  }
  fail(Errc::invalid_argument, "unknown transport");
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  auto addr = resolve_v4(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail(Errc::transport_closed, std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 16) < 0) {
    auto msg = std::string("bind ") + host + ":" + std::to_string(port) + ": " + std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    fail(Errc::transport_closed, msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<ByteChannel> TcpListener::accept(std::chrono::milliseconds timeout) {
  int fd = fd_;
  if (fd < 0) return nullptr;
  pollfd pfd{fd, POLLIN, 0};
  if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return nullptr;
  int c = ::accept4(fd, nullptr, nullptr, SOCK_CLOEXEC);
  if (c < 0) return nullptr;
  int one = 1;
  ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdChannel>(c, true);
}

void TcpListener::close() noexcept {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>> make_memory_pair() {
  auto a = std::make_shared<Pipe>();
  auto b = std::make_shared<Pipe>();
  return {std::make_unique<MemoryChannel>(a, b), std::make_unique<MemoryChannel>(b, a)};
}

struct MemoryHub::Impl {
  std::mutex mu;
  std::map<std::string, Acceptor> listeners;
};

MemoryHub::MemoryHub() : impl_(std::make_shared<Impl>()) {}

MemoryHub& MemoryHub::instance() {
  static MemoryHub hub;
  return hub;
}

void MemoryHub::listen(const std::string& id, Acceptor acceptor) {
  std::lock_guard lk(impl_->mu);
  impl_->listeners[id] = std::move(acceptor);
}

void MemoryHub::unlisten(const std::string& id) {
  std::lock_guard lk(impl_->mu);
  impl_->listeners.erase(id);
}

std::unique_ptr<ByteChannel> MemoryHub::connect(const std::string& id) {
  Acceptor acceptor;
  {
    std::lock_guard lk(impl_->mu);
    auto it = impl_->listeners.find(id);
    if (it == impl_->listeners.end()) fail(Errc::transport_closed, "no listener on mem:" + id);
    acceptor = it->second;
  }
  auto [near, far] = make_memory_pair();
  acceptor(std::move(far));
  return std::move(near);
}

UdpSocket::UdpSocket(const std::string& host, std::uint16_t port) {
  auto addr = resolve_v4(host, port);
  fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail(Errc::transport_closed, std::strerror(errno));
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    auto msg = std::string("udp bind: ") + std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    fail(Errc::transport_closed, msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  local_ = {addr_string(bound), ntohs(bound.sin_port)};
}

UdpSocket::~UdpSocket() { close(); }

void UdpSocket::send_to(const UdpEndpoint& to, std::span<const std::uint8_t> data) {
  if (fd_ < 0) fail(Errc::transport_closed, "udp socket closed");
  auto addr = resolve_v4(to.addr, to.port);
  ::sendto(fd_, data.data(), data.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
}

std::size_t UdpSocket::recv_from(std::span<std::uint8_t> buf, std::chrono::milliseconds timeout,
                                 UdpEndpoint* from) {
  int fd = fd_;
  if (fd < 0) fail(Errc::transport_closed, "udp socket closed");
  pollfd pfd{fd, POLLIN, 0};
  int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return 0;
  sockaddr_in src{};
  socklen_t len = sizeof src;
  ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&src), &len);
  if (n <= 0) return 0;
  if (from != nullptr) *from = {addr_string(src), ntohs(src.sin_port)};
  return static_cast<std::size_t>(n);
}

void UdpSocket::close() noexcept {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace cellgate
