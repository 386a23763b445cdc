// Transport abstraction: request/response with bound listeners.
//
// Two implementations exist: SimNet (deterministic in-memory network,
// include grid/simnet.hpp) and SocketTransport (real TCP, include
// grid/socketnet.hpp). Everything above this interface is transport
// agnostic.

#ifndef GRID_TRANSPORT_HPP_
#define GRID_TRANSPORT_HPP_

#include <cstdint>
#include <functional>
#include <string>

#include "grid/envelope.hpp"

namespace grid {

struct EndpointAddress {
  std::string org;
  std::string service_kind;  // resource-host | index | broker | coalloc |
                             // ca-server | cred-store | storage | client
  std::string name;

  std::string key() const { return org + "/" + service_kind + "/" + name; }
  bool operator==(const EndpointAddress& o) const { return key() == o.key(); }
  bool operator<(const EndpointAddress& o) const { return key() < o.key(); }

  Value to_value() const {
    return Value(ValueRecord{{"org", Value(org)},
                             {"kind", Value(service_kind)},
                             {"name", Value(name)}});
  }
  static EndpointAddress from_value(const Value& v) {
    return EndpointAddress{v.string_or("org", ""), v.string_or("kind", ""),
                           v.string_or("name", "")};
  }
};

// One delivered or failed message, as seen by the network. requests and
// responses are separate entries.
struct TraceEntry {
  std::int64_t seq = 0;
  std::int64_t time_ms = 0;  // send time
  std::string from;          // endpoint key
  std::string to;
  std::string protocol;
  std::string message_type;
  std::string request_id;
  bool is_response = false;
  std::string status;  // "delivered" | "dropped" | "unreachable"
};

using Handler = std::function<Envelope(const Envelope&)>;

class Transport {
 public:
  virtual ~Transport() = default;

  /// Register a listener. At most one live listener per address.
  virtual void bind(const EndpointAddress& addr, Handler handler) = 0;
  virtual void unbind(const EndpointAddress& addr) = 0;

  /// Send a request from `from` to `to` and wait for the reply (up to
  /// timeout_ms). The transport never retries; callers retry with the
  /// same request_id.
  virtual Result<Envelope> request(const EndpointAddress& from,
                                   const EndpointAddress& to, const Envelope& env,
                                   std::int64_t timeout_ms) = 0;

  /// Current time in milliseconds (simulated or wall clock).
  virtual std::int64_t now_ms() = 0;

  /// Let time pass (advances the simulated clock / real sleep).
  virtual void sleep_ms(std::int64_t ms) = 0;

  /// Fresh request id, unique per transport instance. Deterministic on
  /// the simulated transport so replays produce identical traces.
  virtual std::string new_request_id() = 0;
};

}  // namespace grid

#endif  // GRID_TRANSPORT_HPP_
