// Scenario harness: declarative multi-organization fixtures, booted on
// the simulated transport, with fault injection and replayable reports.
//
// A Scenario declares organizations (hosts, gridmaps, policies), users,
// VOs, replicas, workloads and a fault schedule. boot() brings up the
// whole grid: one root authority, per-VO community authorization
// servers, an index, a co-reservation service, every host registered
// with refresh timers, users holding exactly one proxy each. Workloads
// then run to quiescence or deadline and the report captures per-task
// outcomes, message counts, secret-use counters, policy decisions,
// failure events and the full transport trace. Identical (scenario,
// seed) pairs produce byte-identical encoded reports.

#ifndef GRID_HARNESS_HPP_
#define GRID_HARNESS_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "grid/broker.hpp"
#include "grid/cauth.hpp"
#include "grid/coalloc.hpp"
#include "grid/host.hpp"
#include "grid/index.hpp"
#include "grid/simnet.hpp"

namespace grid {

struct HostSpec {
  std::string name;
  int compute_slots = 0;  // 0 = no compute fabric
  std::int64_t slot_speed = 1;
  std::int64_t storage_bytes = 0;  // 0 = no storage fabric
  bool catalog = false;
  std::int64_t calendar_capacity = 0;  // 0 = no slot calendar
  std::set<std::string> tags;
  std::map<std::string, std::string> files;  // preloaded storage content
  std::vector<PolicyRule> policy;            // empty = inherit the org policy

  Value to_value() const;
  static HostSpec from_value(const Value& v);
};

struct OrgSpec {
  std::string name;
  std::vector<HostSpec> hosts;
  GridMap gridmap;
  std::vector<PolicyRule> policy;

  Value to_value() const;
  static OrgSpec from_value(const Value& v);
};

struct UserSpec {
  std::string name;  // identity name, e.g. "/org=A/user=alice"
  Rights rights;

  Value to_value() const;
  static UserSpec from_value(const Value& v);
};

struct VoSpec {
  std::string name;
  std::set<std::string> roster;
  Rights community_rights;
  bool run_ca = false;  // start a community authorization server

  Value to_value() const;
  static VoSpec from_value(const Value& v);
};

struct ReplicaSpec {
  std::string logical;
  std::int64_t size = 0;
  std::vector<ReplicaCopy> copies;  // physical copies; files must be preloaded

  Value to_value() const;
  static ReplicaSpec from_value(const Value& v);
};

struct WorkloadSpec {
  std::string kind;  // "raytrace" | "coupled"
  std::string name;
  std::int64_t tasks = 1;
  std::int64_t work_units = 1;
  std::int64_t work_units_spread = 0;  // task i gets work_units + i % (spread + 1)
  std::string executable;              // logical replica name (stage A for coupled)
  std::string stage_b_executable;      // coupled only
  std::vector<std::string> inputs;     // logical replica names
  std::string owner;                   // identity name
  std::string vo;
  Requirements requirements;
  std::int64_t streams = 1;  // coupled transfer width
  std::int64_t deadline_ms = 120000;
  std::int64_t poll_ms = 1000;

  Value to_value() const;
  static WorkloadSpec from_value(const Value& v);
};

// One injected fault. Either time-triggered (time_ms >= 0, fired on the
// simulated clock) or progress-triggered (after_done >= 0, fired by the
// running workload): for raytrace, when the done-task count reaches the
// value; for coupled, 1 fires after stage A completes and 2 after the
// first failed transfer attempt.
struct FaultEvent {
  std::int64_t time_ms = -1;
  std::string kind;  // host-crash | host-restart | partition | heal
  std::string target;
  std::string target2;  // partition / heal peer
  std::int64_t after_done = -1;

  Value to_value() const;
  static FaultEvent from_value(const Value& v);
};

struct FaultSchedule {
  std::vector<FaultEvent> events;

  Value to_value() const;
  static FaultSchedule from_value(const Value& v);
};

struct Scenario {
  std::string name;
  std::vector<OrgSpec> organizations;
  std::vector<UserSpec> users;
  std::vector<VoSpec> vos;
  std::vector<ReplicaSpec> replicas;
  std::vector<WorkloadSpec> workloads;
  SimNetConfig net;
  FaultSchedule faults;
  std::vector<PolicyRule> coalloc_policy;  // empty = allow everything
  std::int64_t index_ttl_ms = 30000;
  bool auto_refresh = true;
  std::int64_t deadline_ms = 600000;  // simulated, whole-scenario budget

  Value to_value() const;
  static Result<Scenario> from_value(const Value& v);
};

/// Structural checks before anything boots. The error detail names the
/// offending field, e.g. "workloads[1].owner: undeclared identity".
Status validate_scenario(const Scenario& s);

struct TaskOutcome {
  std::string task_id;
  std::string state;  // done | denied | failed | ...
  std::string host;   // where the final attempt ran
  std::int64_t attempts = 0;
  std::vector<std::string> attempt_hosts;     // lineage, one entry per attempt
  std::vector<std::string> attempt_requests;  // fresh request_id per attempt

  Value to_value() const;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::int64_t finished_ms = 0;
  std::vector<TaskOutcome> tasks;
  std::map<std::string, std::int64_t> protocol_counts;
  std::map<std::string, std::int64_t> unlocks;      // identity -> long-term uses
  std::map<std::string, std::int64_t> proxy_inits;  // identity -> proxies created
  std::vector<Value> policy_decisions;
  std::vector<Value> failure_events;  // injected faults + index DOWN/OVERLOAD
  std::vector<TraceEntry> trace;

  Value to_value() const;
  std::string summary() const;
};

/// A booted scenario. Hosts, index, CA servers and timers are live on
/// the contained network; tests drive workloads and faults directly.
class ScenarioRuntime {
 public:
  static Result<std::unique_ptr<ScenarioRuntime>> boot(const Scenario& s);
  ~ScenarioRuntime();

  ScenarioRuntime(const ScenarioRuntime&) = delete;
  ScenarioRuntime& operator=(const ScenarioRuntime&) = delete;

  SimNet& net() { return net_; }
  IndexService& index() { return *index_; }
  CoReservationService& coalloc() { return *coalloc_; }
  ResourceHost* host(const std::string& name);
  CommunityAuthService* ca_server(const std::string& vo);
  const Chain& user_proxy(const std::string& name) const;
  const FabricLog& fabric() const { return fabric_; }
  const EndpointAddress& catalog_endpoint() const { return catalog_ep_; }
  GridClient client_for(const std::string& user);

  Result<std::vector<TaskOutcome>> run_workload(const WorkloadSpec& w);
  Result<std::vector<TaskOutcome>> run_raytrace(const WorkloadSpec& w);
  /// Reserves both compute windows up front, runs stage A in one org,
  /// third-party-transfers its output and runs stage B on it in the
  /// other org. Outcomes: plan, stage-a, transfer, stage-b.
  Result<std::vector<TaskOutcome>> run_coupled(const WorkloadSpec& w);

  void fire_fault(const FaultEvent& ev);
  /// Stop refreshing and let every registration expire, so the report
  /// ends with the index agreeing the grid is gone.
  void shutdown();

  ScenarioReport report();

 private:
  ScenarioRuntime() = default;
  Status setup(const Scenario& s);
  void fire_progress_faults(const std::string& workload_kind, std::int64_t done);
  Result<std::string> wait_job(GridClient& c, const EndpointAddress& host,
                               const std::string& job_id, std::int64_t deadline,
                               std::int64_t poll_ms);

  Scenario scenario_;
  SimNet net_;
  std::shared_ptr<KeyStore> keys_ = std::make_shared<KeyStore>();
  Identity root_{"/authority=root", IdentityKind::Authority};
  std::string root_key_;
  TrustStore trust_;
  FabricLog fabric_;
  std::map<std::string, std::unique_ptr<CommunityAuthService>> cas_;
  std::unique_ptr<IndexService> index_;
  std::unique_ptr<CoReservationService> coalloc_;
  std::vector<std::unique_ptr<ResourceHost>> hosts_;
  std::map<std::string, ResourceHost*> host_by_name_;
  std::map<std::string, Chain> proxies_;  // identity name -> working proxy
  std::map<std::string, std::int64_t> proxy_inits_;
  EndpointAddress catalog_ep_;
  Chain admin_proxy_;
  std::vector<FaultEvent> pending_faults_;  // progress-triggered, unfired
  std::vector<Value> fired_faults_;
  std::vector<std::int64_t> timers_;
  std::int64_t client_counter_ = 0;
  bool shut_down_ = false;
};

/// Validate, boot, run every workload, shut down, report.
Result<ScenarioReport> run_scenario(const Scenario& s);

}  // namespace grid

#endif  // GRID_HARNESS_HPP_
