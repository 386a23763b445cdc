#include "grid/socketnet.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace grid {

namespace {

bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r <= 0) return false;
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

// One length-prefixed envelope frame off the wire. The 4-byte prefix is
// part of the canonical encoding, so the decoder gets the whole frame.
Result<Envelope> read_frame(int fd) {
  std::uint8_t head[4];
  if (!read_exact(fd, head, 4)) return make_error(Err::Timeout, "short read");
  std::uint32_t n = (std::uint32_t(head[0]) << 24) | (std::uint32_t(head[1]) << 16) |
                    (std::uint32_t(head[2]) << 8) | std::uint32_t(head[3]);
  if (n > (64u << 20)) return make_error(Err::Malformed, "oversized frame");
  Bytes frame(4 + n);
  std::memcpy(frame.data(), head, 4);
  if (n && !read_exact(fd, frame.data() + 4, n)) return make_error(Err::Timeout, "short body");
  return decode_envelope(frame);
}

bool write_frame(int fd, const Envelope& e) {
  auto bytes = encode_envelope(e);
  if (!bytes.ok()) return false;
  return write_all(fd, bytes->data(), bytes->size());
}

}  // namespace

SocketTransport::SocketTransport(SocketConfig config) : config_(std::move(config)) {}

SocketTransport::~SocketTransport() {
  std::map<std::string, std::shared_ptr<Listener>> listeners;
  {
    std::lock_guard<std::mutex> lock(mu_);
    listeners.swap(listeners_);
  }
  for (auto& [key, l] : listeners) {
    l->stop = true;
    if (l->thread.joinable()) l->thread.join();
    if (l->fd >= 0) ::close(l->fd);
  }
}

void SocketTransport::bind(const EndpointAddress& addr, Handler handler) {
  unbind(addr);
  auto l = std::make_shared<Listener>();
  l->handler = std::move(handler);

  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return;
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  ::inet_pton(AF_INET, config_.host.c_str(), &sa.sin_addr);
  auto fixed = config_.ports.find(addr.key());
  sa.sin_port = htons(fixed != config_.ports.end() ? static_cast<std::uint16_t>(fixed->second)
                                                   : 0);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 || ::listen(fd, 16) != 0) {
    ::close(fd);
    return;
  }
  socklen_t len = sizeof(sa);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  l->fd = fd;
  l->port = ntohs(sa.sin_port);
  {
    std::lock_guard<std::mutex> lock(mu_);
    assigned_[addr.key()] = l->port;
    listeners_[addr.key()] = l;
  }
  Listener* raw = l.get();
  l->thread = std::thread([this, raw] { accept_loop(raw); });
}

void SocketTransport::unbind(const EndpointAddress& addr) {
  std::shared_ptr<Listener> l;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = listeners_.find(addr.key());
    if (it == listeners_.end()) return;
    l = it->second;
    listeners_.erase(it);
  }
  l->stop = true;
  if (l->thread.joinable()) l->thread.join();
  if (l->fd >= 0) ::close(l->fd);
}

void SocketTransport::accept_loop(Listener* l) {
  while (!l->stop) {
    pollfd p{l->fd, POLLIN, 0};
    int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    int conn = ::accept(l->fd, nullptr, nullptr);
    if (conn < 0) continue;
    auto req = read_frame(conn);
    if (req.ok()) {
      Envelope reply;
      {
        std::lock_guard<std::mutex> lock(l->serial);
        reply = l->handler(*req);
      }
      write_frame(conn, reply);
    }
    ::close(conn);
  }
}

int SocketTransport::port_for(const std::string& key) const {
  if (auto it = config_.ports.find(key); it != config_.ports.end()) return it->second;
  std::lock_guard<std::mutex> lock(mu_);
  if (auto it = assigned_.find(key); it != assigned_.end()) return it->second;
  return 0;
}

Result<Envelope> SocketTransport::request(const EndpointAddress& /*from*/,
                                          const EndpointAddress& to, const Envelope& env,
                                          std::int64_t timeout_ms) {
  int port = port_for(to.key());
  if (port == 0) return make_error(Err::Unreachable, "no address for " + to.key());
  // A crashed service leaves no listener behind its port.
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (config_.ports.empty() && !listeners_.count(to.key()))
      return make_error(Err::Unreachable, "no listener at " + to.key());
  }

  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return make_error(Err::Unreachable, "socket");
  timeval tv{};
  tv.tv_sec = timeout_ms / 1000;
  tv.tv_usec = (timeout_ms % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<std::uint16_t>(port));
  ::inet_pton(AF_INET, config_.host.c_str(), &sa.sin_addr);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    ::close(fd);
    return make_error(Err::Unreachable, to.key());
  }
  if (!write_frame(fd, env)) {
    ::close(fd);
    return make_error(Err::Timeout, "send " + to.key());
  }
  auto reply = read_frame(fd);
  ::close(fd);
  return reply;
}

std::int64_t SocketTransport::now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - start_)
      .count();
}

void SocketTransport::sleep_ms(std::int64_t ms) {
  std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

std::string SocketTransport::new_request_id() { return "s" + std::to_string(++id_counter_); }

std::map<std::string, int> SocketTransport::ports() const {
  std::lock_guard<std::mutex> lock(mu_);
  return assigned_;
}

}  // namespace grid
