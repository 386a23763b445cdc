// Index service: soft-state registrations with views, a periodic sweep
// and liveness monitoring.
//
// Registrations arrive over "grrp" and die when their deadline passes
// without a refresh. Queries (over "info") only ever see live entries;
// the sweep additionally emits DOWN events for expired registrants and
// OVERLOAD events when a registrant's queue exceeds the configured
// threshold in two consecutive refreshes.

#ifndef GRID_INDEX_HPP_
#define GRID_INDEX_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "grid/authproto.hpp"

namespace grid {

struct IndexConfig {
  std::string org;
  std::string name;
  TrustStore trust;
  std::int64_t min_ttl_ms = 1000;
  std::int64_t max_ttl_ms = 3600000;
  std::int64_t sweep_period_ms = 1000;
  std::int64_t overload_queue_threshold = 1 << 30;
};

struct Registration {
  Value descriptor;
  std::string endpoint_key;
  std::string registrant;  // verified identity name
  std::int64_t ttl_ms = 0;
  std::int64_t deadline_ms = 0;
  std::int64_t last_refresh_ms = 0;
  std::int64_t generation = 0;
  int overload_streak = 0;
};

class IndexService {
 public:
  IndexService(Transport& net, std::shared_ptr<KeyStore> keys, Chain service_chain,
               IndexConfig config);

  void start();
  void stop();
  const EndpointAddress& endpoint() const { return addr_; }

  /// Named view: live members are the registrations matching the filter
  /// at query time.
  void define_view(const std::string& name, ValueRecord filter);

  /// Drop expired registrations, emitting one DOWN each. Driven by the
  /// harness clock at sweep_period_ms.
  void sweep(std::int64_t now_ms);

  /// Live descriptors matching `filter`, each with a "staleness" field.
  std::vector<Value> snapshot(std::int64_t now_ms, const ValueRecord& filter = {}) const;

  // Monitor output: records {time_ms, kind: "DOWN"|"OVERLOAD", resource}.
  const std::vector<Value>& events() const { return events_; }
  const std::map<std::string, Registration>& registrations() const { return regs_; }

  // On-demand persistence: live registrations in canonical form;
  // reloading recomputes deadlines from each entry's ttl.
  Value snapshot_value() const;
  Status load_snapshot(const Value& v, std::int64_t now_ms);

  Envelope handle(const Envelope& req);

 private:
  static bool matches(const Value& descriptor, const ValueRecord& filter);

  Transport& net_;
  std::shared_ptr<KeyStore> keys_;
  Chain chain_;
  IndexConfig config_;
  EndpointAddress addr_;
  AuthServer auth_;
  bool alive_ = false;

  std::map<std::string, Registration> regs_;  // by endpoint key
  std::map<std::string, ValueRecord> views_;
  std::map<std::string, std::int64_t> ack_cache_;  // request_id -> generation
  std::vector<Value> events_;
};

}  // namespace grid

#endif  // GRID_INDEX_HPP_
