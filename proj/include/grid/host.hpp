// Resource host: one authenticated service in front of local fabric
// state. Speaks exactly four request protocols besides "auth":
//
//   grrp  (client side) soft-state registration with an index
//   info  descriptor enquiry, file stat, catalog query/update
//   mgmt  job allocation/status/cancel and slot reservations
//   data  third-party transfer (XFER control, CHUNK push, assembly)
//
// Allocation is exactly-once under caller retries: the host keeps a
// tombstone per request_id and replays the cached success instead of
// starting a second task. Tombstones survive restart; sessions and
// tentative holds do not.

#ifndef GRID_HOST_HPP_
#define GRID_HOST_HPP_

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grid/authproto.hpp"
#include "grid/capability.hpp"
#include "grid/fabric.hpp"
#include "grid/policy.hpp"

namespace grid {

struct HostConfig {
  std::string org;
  std::string name;
  GridMap gridmap;
  std::vector<PolicyRule> policy;
  TrustStore trust;
  // Community authorization: when set, a valid capability from this
  // issuer substitutes for both the rights check and the gridmap entry.
  bool trust_community_ca = false;
  std::string community_account = "community";
  std::int64_t queue_limit = 1000;
  std::int64_t min_ttl_ms = 1000;
  std::int64_t max_ttl_ms = 3600000;
};

enum class JobState { Staging, Queued, Running, Done, Failed, Cancelled };
const char* job_state_name(JobState s);

struct JobRecord {
  std::string job_id;
  std::string request_id;
  std::string owner;          // requester root identity name
  std::string local_account;  // gridmap / community mapping
  std::string vo;
  std::string task_id;  // fabric task, empty while staging failed early
  std::int64_t work_units = 0;
  std::string executable;
  std::string output_path;
  std::int64_t submitted_ms = 0;

  Value to_value() const;
};

class ResourceHost {
 public:
  ResourceHost(Transport& net, std::shared_ptr<KeyStore> keys, Chain service_chain,
               HostConfig config, FabricLog* log = nullptr);

  // Fabric attachment (before start).
  void attach_compute(int slots, std::int64_t slot_speed_units_per_s,
                      std::set<std::string> tags = {});
  void attach_storage(std::int64_t capacity_bytes, std::set<std::string> tags = {});
  void attach_catalog();
  void set_calendar_capacity(std::int64_t capacity, std::int64_t hold_timeout_ms = 30000);

  void start();
  /// Crash: unbind, lose sessions, tentative holds, in-flight transfers
  /// and all queued/running tasks. Job tombstones and files persist.
  void crash();
  void restart();
  bool alive() const { return alive_; }

  const EndpointAddress& endpoint() const { return addr_; }
  const std::string& name() const { return config_.name; }
  const Chain& chain() const { return chain_; }

  /// Current self-description (the record grrp registers and info serves).
  Value descriptor();

  // grrp client side. register_with returns the index generation. A
  // caller-supplied request_id makes retries idempotent at the index.
  Result<std::int64_t> register_with(const EndpointAddress& index, std::int64_t ttl_ms,
                                     std::string request_id = "");
  Status refresh_with(const EndpointAddress& index, std::int64_t ttl_ms);
  Status unregister_with(const EndpointAddress& index);

  // Direct fabric access for scenario setup and assertions.
  ComputeResource* compute() { return compute_ ? &*compute_ : nullptr; }
  StorageResource* storage() { return storage_ ? &*storage_ : nullptr; }
  CatalogResource* catalog() { return catalog_ ? &*catalog_ : nullptr; }
  SlotCalendar* calendar() { return calendar_ ? &*calendar_ : nullptr; }
  const std::map<std::string, JobRecord>& jobs() const { return jobs_; }
  Result<JobState> job_state(const std::string& job_id);

  // Policy decisions taken, for audit reports.
  const std::vector<Value>& decision_log() const { return decisions_; }

  Envelope handle(const Envelope& req);

 private:
  struct PendingTransfer {
    std::string dest_path;
    std::string owner;
    std::string vo;
    std::int64_t total = 0;
    std::map<std::int64_t, std::string> pieces;  // offset -> bytes
    std::int64_t received = 0;
    bool checked = false;  // rights/policy/space verified on first chunk
  };

  Envelope handle_info(const Envelope& req, const AuthServer::SessionInfo& s);
  Envelope handle_mgmt(const Envelope& req, const AuthServer::SessionInfo& s);
  Envelope handle_data(const Envelope& req, const AuthServer::SessionInfo& s);
  Envelope do_allocate(const Envelope& req, const AuthServer::SessionInfo& s);
  Envelope do_xfer(const Envelope& req, const AuthServer::SessionInfo& s);
  Envelope do_chunk(const Envelope& req, const AuthServer::SessionInfo& s);

  /// Rights + policy + mapping for one operation. On success returns the
  /// local account. `cap` may substitute for rights and mapping.
  Result<std::string> authorize(const AuthServer::SessionInfo& s, const std::string& operation,
                                const std::string& vo, const std::map<std::string, Value>& context,
                                const std::optional<Capability>& cap, std::string* stage);

  void settle(std::int64_t now_ms);  // drive compute + calendar purge
  Value job_status_value(const JobRecord& j, std::int64_t now_ms);
  Envelope sign_reply(Envelope e);

  Transport& net_;
  std::shared_ptr<KeyStore> keys_;
  Chain chain_;
  HostConfig config_;
  FabricLog* log_;
  FabricLog own_log_;  // used when no external log is supplied
  EndpointAddress addr_;
  AuthServer auth_;
  std::optional<AuthClient> client_;  // created at start (needs the bound address)
  bool alive_ = false;

  std::optional<ComputeResource> compute_;
  std::optional<StorageResource> storage_;
  std::optional<CatalogResource> catalog_;
  std::optional<SlotCalendar> calendar_;

  std::map<std::string, JobRecord> jobs_;            // by job id
  std::map<std::string, std::string> tombstones_;    // request_id -> job id
  std::map<std::string, std::string> rsv_requests_;  // request_id -> reservation id
  std::map<std::string, PendingTransfer> transfers_;
  std::set<std::string> completed_transfers_;  // for idempotent final-chunk retries
  std::vector<Value> decisions_;
  std::int64_t job_counter_ = 0;
  std::int64_t transfer_counter_ = 0;
  std::int64_t generation_ = 0;  // last generation granted by an index
};

}  // namespace grid

#endif  // GRID_HOST_HPP_
