#include "tinyva/harness/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "tinyva/errors.hpp"

namespace tinyva::harness {
namespace {

[[noreturn]] void sys_error(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

bool wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) sys_error("poll");
  }
}

}  // namespace

void PipeEnd::write(std::span<const std::uint8_t> bytes) {
  {
    std::lock_guard lock(tx_->mutex);
    if (tx_->closed) throw TransportError("write on a closed pipe");
    tx_->bytes.insert(tx_->bytes.end(), bytes.begin(), bytes.end());
  }
  tx_->ready.notify_all();
}

std::size_t PipeEnd::read_some(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  std::unique_lock lock(rx_->mutex);
  if (!rx_->ready.wait_for(lock, timeout, [&] { return !rx_->bytes.empty() || rx_->closed; })) {
    throw TransportError("read timed out");
  }
  const std::size_t n = std::min(out.size(), rx_->bytes.size());
  std::copy_n(rx_->bytes.begin(), n, out.begin());
  rx_->bytes.erase(rx_->bytes.begin(), rx_->bytes.begin() + static_cast<std::ptrdiff_t>(n));
  return n;
}

void PipeEnd::close() {
  {
    std::lock_guard lock(tx_->mutex);
    tx_->closed = true;
  }
  tx_->ready.notify_all();
}

std::pair<std::unique_ptr<PipeEnd>, std::unique_ptr<PipeEnd>> make_pipe() {
  auto a_to_b = std::make_shared<PipeEnd::Channel>();
  auto b_to_a = std::make_shared<PipeEnd::Channel>();
  return {std::make_unique<PipeEnd>(b_to_a, a_to_b), std::make_unique<PipeEnd>(a_to_b, b_to_a)};
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  try {
    std::size_t used = 0;
    const unsigned long port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw ConfigError("invalid port in endpoint '" + text + "'");
  }
  return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

TcpStream::~TcpStream() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpStream::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve " + ep.to_string());
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      ::freeaddrinfo(res);
      sys_error("socket");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return std::make_unique<TcpStream>(fd);
    }
    const int err = errno;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      ::freeaddrinfo(res);
      throw TransportError("cannot connect to " + ep.to_string() + ": " + std::strerror(err));
    }
    ::usleep(50'000);
  }
}

void TcpStream::write(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_error("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t TcpStream::read_some(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  if (!wait_fd(fd_, POLLIN, timeout)) throw TransportError("read timed out");
  for (;;) {
    const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    sys_error("recv");
  }
}

void TcpStream::close() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

TcpListener::TcpListener(const Endpoint& ep) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_error("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host == "localhost" ? "127.0.0.1" : ep.host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ConfigError("listen address must be a dotted IPv4 address: " + ep.host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 1) != 0) {
    const int err = errno;
    ::close(fd_);
    throw TransportError("cannot listen on " + ep.to_string() + ": " + std::strerror(err));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpListener::accept(std::chrono::milliseconds timeout) {
  if (!wait_fd(fd_, POLLIN, timeout)) throw TransportError("no connection before timeout");
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) sys_error("accept");
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<TcpStream>(fd);
}

}  // namespace tinyva::harness
