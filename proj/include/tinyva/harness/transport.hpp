#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace tinyva::harness {

/// Reliable, ordered byte stream between host and device.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void write(std::span<const std::uint8_t> bytes) = 0;

  /// Reads up to out.size() bytes, blocking until at least one is available.
  /// Returns 0 at end of stream; throws TransportError on timeout.
  virtual std::size_t read_some(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) = 0;

  /// Signals end of stream to the peer.
  virtual void close() = 0;
};

/// In-memory full-duplex pipe; make_pipe() returns the two connected ends.
class PipeEnd final : public Transport {
 public:
  struct Channel {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::uint8_t> bytes;
    bool closed{false};
  };

  PipeEnd(std::shared_ptr<Channel> rx, std::shared_ptr<Channel> tx)
      : rx_(std::move(rx)), tx_(std::move(tx)) {}
  ~PipeEnd() override { close(); }

  void write(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  std::shared_ptr<Channel> rx_;
  std::shared_ptr<Channel> tx_;
};

std::pair<std::unique_ptr<PipeEnd>, std::unique_ptr<PipeEnd>> make_pipe();

/// host:port endpoint.
struct Endpoint {
  std::string host{"127.0.0.1"};
  std::uint16_t port{0};

  /// Parses "host:port"; throws ConfigError on malformed input.
  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

class TcpStream final : public Transport {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  static std::unique_ptr<TcpStream> connect(const Endpoint& ep, std::chrono::milliseconds timeout);

  void write(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  int fd_{-1};
};

class TcpListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port (see port()).
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::unique_ptr<TcpStream> accept(std::chrono::milliseconds timeout);

 private:
  int fd_{-1};
  std::uint16_t port_{0};
};

}  // namespace tinyva::harness
