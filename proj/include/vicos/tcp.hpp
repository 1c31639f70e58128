#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <mutex>
#include <string>

#include "vicos/transport.hpp"

namespace vicos {

/// Framing on the wire: a 4-byte big-endian length prefix followed by the
/// message bytes (whose first byte is the protocol version).  The first
/// frame after connecting is a hello frame [version, 0x00, client-id]
/// identifying the peer; everything after is protocol traffic.
inline constexpr std::size_t max_frame_len = 256u << 20;

namespace detail {

inline void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n <= 0) throw storage_error("connection write failed");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

inline bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::recv(fd, data, len, 0);
    if (n == 0) return false;  // orderly close
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

class tcp_duplex final : public duplex {
 public:
  explicit tcp_duplex(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  ~tcp_duplex() override { close(); }

  void send(byte_view msg) override {
    if (msg.size() > max_frame_len) throw storage_error("frame too large");
    std::lock_guard lock(write_mu_);
    if (closed_) throw storage_error("channel closed");
    std::uint8_t hdr[4] = {static_cast<std::uint8_t>(msg.size() >> 24),
                           static_cast<std::uint8_t>(msg.size() >> 16),
                           static_cast<std::uint8_t>(msg.size() >> 8),
                           static_cast<std::uint8_t>(msg.size())};
    write_all(fd_, hdr, 4);
    write_all(fd_, msg.data(), msg.size());
  }

  std::optional<bytes> receive(long timeout_ms) override {
    if (closed_) return std::nullopt;
    if (timeout_ms >= 0) {
      pollfd pfd{fd_, POLLIN, 0};
      int r = ::poll(&pfd, 1, static_cast<int>(timeout_ms));
      if (r <= 0) return std::nullopt;
    }
    std::uint8_t hdr[4];
    if (!read_all(fd_, hdr, 4)) {
      mark_closed();
      return std::nullopt;
    }
    std::size_t len = std::size_t(hdr[0]) << 24 | std::size_t(hdr[1]) << 16 |
                      std::size_t(hdr[2]) << 8 | std::size_t(hdr[3]);
    if (len > max_frame_len) {
      mark_closed();
      return std::nullopt;
    }
    bytes payload(len);
    if (!read_all(fd_, payload.data(), len)) {
      mark_closed();
      return std::nullopt;
    }
    return payload;
  }

  void close() override {
    std::lock_guard lock(write_mu_);
    mark_closed();
  }

  bool closed() const override { return closed_; }

 private:
  void mark_closed() {
    if (!closed_) {
      closed_ = true;
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
    }
  }

  int fd_;
  std::mutex write_mu_;
  std::atomic<bool> closed_{false};
};

inline bytes hello_frame(client_id id) {
  byte_writer w;
  w.u8(wire_version);
  w.u8(0x00);  // hello tag: transport-level, never a protocol message
  w.u32(id);
  return w.take();
}

inline std::optional<client_id> parse_hello(byte_view frame) {
  if (frame.size() != 6 || frame[0] != wire_version || frame[1] != 0x00)
    return std::nullopt;
  return std::uint32_t(frame[2]) << 24 | std::uint32_t(frame[3]) << 16 |
         std::uint32_t(frame[4]) << 8 | std::uint32_t(frame[5]);
}

}  // namespace detail

inline std::unique_ptr<duplex> tcp_connect(const std::string& host, std::uint16_t port,
                                           client_id id) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw storage_error("cannot resolve " + host);
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw storage_error("cannot connect to " + host + ":" + std::to_string(port));
  auto ch = std::make_unique<detail::tcp_duplex>(fd);
  ch->send(byte_view(detail::hello_frame(id)));
  return ch;
}

class tcp_listener {
 public:
  explicit tcp_listener(std::uint16_t port = 0, const std::string& bind_host = "0.0.0.0") {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw storage_error("cannot create listen socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1)
      throw storage_error("bad bind address: " + bind_host);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw storage_error("cannot bind port " + std::to_string(port));
    if (::listen(fd_, 64) != 0) throw storage_error("cannot listen");
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  ~tcp_listener() { close(); }

  std::uint16_t port() const { return port_; }

  /// Blocks for the next connection and its hello frame; nullopt when the
  /// listener was closed or the peer spoke garbage.
  std::optional<std::pair<std::unique_ptr<duplex>, client_id>> accept() {
    int conn = ::accept(fd_, nullptr, nullptr);
    if (conn < 0) return std::nullopt;
    auto ch = std::make_unique<detail::tcp_duplex>(conn);
    auto hello = ch->receive(5000);
    if (!hello) return std::nullopt;
    auto id = detail::parse_hello(byte_view(*hello));
    if (!id) return std::nullopt;
    return {{std::move(ch), *id}};
  }

  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace vicos
