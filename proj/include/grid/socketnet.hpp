// TCP transport: the same request/response contract as the simulated
// network, over loopback sockets with length-framed envelopes.
//
// Each bound endpoint gets a listener thread; handler execution is
// serialized per endpoint, so services written for the single-threaded
// simulated transport run unchanged. Ports come from a static address
// table when configured (separate processes) or are assigned on bind
// (everything in one process).

#ifndef GRID_SOCKETNET_HPP_
#define GRID_SOCKETNET_HPP_

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "grid/transport.hpp"

namespace grid {

struct SocketConfig {
  std::string host = "127.0.0.1";
  std::map<std::string, int> ports;  // endpoint key -> fixed port
};

class SocketTransport : public Transport {
 public:
  explicit SocketTransport(SocketConfig config = {});
  ~SocketTransport() override;

  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void bind(const EndpointAddress& addr, Handler handler) override;
  void unbind(const EndpointAddress& addr) override;
  Result<Envelope> request(const EndpointAddress& from, const EndpointAddress& to,
                           const Envelope& env, std::int64_t timeout_ms) override;
  /// Milliseconds since this transport was created (wall clock).
  std::int64_t now_ms() override;
  void sleep_ms(std::int64_t ms) override;
  std::string new_request_id() override;

  /// Live port map, including auto-assigned listeners.
  std::map<std::string, int> ports() const;

 private:
  struct Listener {
    int fd = -1;
    int port = 0;
    Handler handler;
    std::thread thread;
    std::atomic<bool> stop{false};
    std::mutex serial;  // one handler invocation at a time per endpoint
  };

  void accept_loop(Listener* l);
  int port_for(const std::string& key) const;

  SocketConfig config_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Listener>> listeners_;
  std::map<std::string, int> assigned_;  // endpoint key -> ephemeral port
  std::atomic<std::int64_t> id_counter_{0};
};

}  // namespace grid

#endif  // GRID_SOCKETNET_HPP_
