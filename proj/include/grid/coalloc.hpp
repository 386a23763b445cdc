// Two-phase co-allocation over the management protocol, plus the
// co-reservation service layered on top of it.
//
// Phase 1 takes tentative holds on every leg in plan order; any failure
// releases everything acquired so far. Phase 2 confirms every leg; a
// confirm failure releases all legs. Tentative-hold timeouts at the
// hosts are the backstop when a release cannot be delivered: the final
// global state is all-confirmed or all-released, never mixed.

#ifndef GRID_COALLOC_HPP_
#define GRID_COALLOC_HPP_

#include <memory>
#include <string>
#include <vector>

#include "grid/broker.hpp"
#include "grid/client.hpp"
#include "grid/policy.hpp"

namespace grid {

struct PlanLeg {
  EndpointAddress host;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::int64_t amount = 1;

  Value to_value() const;
  static PlanLeg from_value(const Value& v);
};

struct CoAllocationPlan {
  std::string plan_id;
  std::vector<PlanLeg> legs;
  std::string state;  // "confirmed" | "aborted"
  std::vector<std::string> reservation_ids;  // per acquired leg
  Value to_value() const;
};

/// All-or-nothing reserve+confirm across every leg. On failure the
/// error is LegConflict / LegUnreachable / Aborted with aux = the
/// failing leg index; all acquired holds have been released (or will
/// expire at their hosts).
Result<CoAllocationPlan> coallocate(GridClient& client, const std::vector<PlanLeg>& legs,
                                    const std::string& vo, std::string plan_id = "");

struct CoReservationConfig {
  std::string org;
  std::string name;
  TrustStore trust;
  std::vector<PolicyRule> policy;  // pre-flight check, operation "reserve"
  EndpointAddress index;           // re-queried before the single retry
};

/// Service tier: policy pre-flight, one automatic retry of an aborted
/// plan after re-querying the index (substituting the failed leg when a
/// fresh candidate exists), and an append-only decision log.
class CoReservationService {
 public:
  CoReservationService(Transport& net, std::shared_ptr<KeyStore> keys, Chain service_chain,
                       CoReservationConfig config);

  void start();
  void stop();
  const EndpointAddress& endpoint() const { return addr_; }
  const std::vector<Value>& decision_log() const { return log_; }

  Envelope handle(const Envelope& req);

 private:
  Transport& net_;
  std::shared_ptr<KeyStore> keys_;
  Chain chain_;
  CoReservationConfig config_;
  EndpointAddress addr_;
  AuthServer auth_;
  std::optional<GridClient> client_;
  std::map<std::string, Envelope> done_;  // request_id -> reply, replayed on retry
  std::vector<Value> log_;
  std::int64_t plan_counter_ = 0;
  bool alive_ = false;
};

/// Client side: ask the co-reservation service for an end-to-end plan.
Result<CoAllocationPlan> co_reserve_end_to_end(AuthClient& client, const EndpointAddress& service,
                                               const Chain& chain, const std::string& vo,
                                               const std::vector<PlanLeg>& legs);

}  // namespace grid

#endif  // GRID_COALLOC_HPP_
