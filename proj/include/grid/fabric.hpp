// Fabric layer: local resource state machines. Compute execution is a
// lazy FIFO simulation driven by the clock passed into each call, so it
// behaves identically under the simulated and the wall clock. All
// mutations are serialized by the owning resource host.

#ifndef GRID_FABRIC_HPP_
#define GRID_FABRIC_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "grid/record.hpp"

namespace grid {

// Append-only log of fabric-level mutations; the interposition and
// exactly-once oracles count entries here.
struct FabricEvent {
  std::int64_t time_ms;
  std::string resource;
  std::string kind;    // "start_task", "put_file", "reserve", ...
  std::string detail;  // request_id / path / reservation id
};

class FabricLog {
 public:
  void append(std::int64_t time_ms, const std::string& resource, const std::string& kind,
              const std::string& detail) {
    events_.push_back({time_ms, resource, kind, detail});
  }
  const std::vector<FabricEvent>& events() const { return events_; }
  std::int64_t count(const std::string& kind, const std::string& detail = "") const {
    std::int64_t n = 0;
    for (const auto& e : events_)
      if (e.kind == kind && (detail.empty() || e.detail == detail)) n++;
    return n;
  }
  void clear() { events_.clear(); }

 private:
  std::vector<FabricEvent> events_;
};

enum class TaskState { Queued, Running, Done, Failed, Cancelled };
const char* task_state_name(TaskState s);

struct Task {
  std::string task_id;
  std::int64_t work_units = 0;
  std::string executable;
  std::vector<std::string> inputs;
  std::string output_path;   // optional: file written to the local store on completion
  TaskState state = TaskState::Queued;
  std::int64_t submitted_ms = 0;
  std::int64_t started_ms = -1;
  std::int64_t finished_ms = -1;
};

class ComputeResource {
 public:
  ComputeResource(std::string name, std::string org, int total_slots,
                  std::int64_t slot_speed_units_per_s, std::set<std::string> tags = {});

  /// Queue a task. Precondition (checked by the host): the executable
  /// is staged in the host's local store.
  std::string start_task(std::int64_t now_ms, std::int64_t work_units,
                         const std::string& executable,
                         const std::vector<std::string>& inputs,
                         const std::string& output_path = "");
  Result<TaskState> task_status(std::int64_t now_ms, const std::string& task_id);
  Result<Task> task_record(std::int64_t now_ms, const std::string& task_id);
  /// Cancel is idempotent; cancelling a terminal task returns its state.
  Result<TaskState> cancel_task(std::int64_t now_ms, const std::string& task_id);

  /// Advance the FIFO schedule up to now. Completed tasks that declare
  /// an output_path are reported so the host can materialize the file.
  std::vector<Task> advance(std::int64_t now_ms);

  int free_slots(std::int64_t now_ms);
  int queue_length(std::int64_t now_ms);
  int total_slots() const { return total_slots_; }
  const std::set<std::string>& tags() const { return tags_; }
  const std::string& name() const { return name_; }
  const std::string& org() const { return org_; }
  std::int64_t used_work_units() const { return used_work_units_; }

  /// Crash semantics: queued and running tasks are lost (failed).
  void crash(std::int64_t now_ms);

 private:
  std::string name_;
  std::string org_;
  int total_slots_;
  std::int64_t slot_speed_;  // work units per second, >= 1
  std::set<std::string> tags_;
  std::map<std::string, Task> tasks_;
  std::deque<std::string> queue_;
  // slot free times; size == total_slots
  std::vector<std::int64_t> slot_free_at_;
  std::map<std::string, std::size_t> running_slot_;  // task id -> slot index
  std::int64_t task_counter_ = 0;
  std::int64_t used_work_units_ = 0;
};

class StorageResource {
 public:
  StorageResource(std::string name, std::string org, std::int64_t capacity_bytes,
                  std::int64_t bandwidth_bps = 0, std::set<std::string> tags = {});

  Status put_file(const std::string& path, const std::string& content);
  Result<std::string> get_file(const std::string& path) const;
  Result<std::string> read_range(const std::string& path, std::int64_t offset,
                                 std::int64_t length) const;
  Result<std::int64_t> file_size(const std::string& path) const;
  Status remove_file(const std::string& path);

  std::int64_t used_bytes() const;
  std::int64_t free_bytes() const { return capacity_ - used_bytes(); }
  std::int64_t capacity() const { return capacity_; }
  const std::map<std::string, std::string>& files() const { return files_; }
  const std::string& name() const { return name_; }
  const std::string& org() const { return org_; }
  const std::set<std::string>& tags() const { return tags_; }

  /// Absolute, "."/".." free, duplicate-slash free; error otherwise.
  static Result<std::string> normalize_path(const std::string& path);

 private:
  std::string name_;
  std::string org_;
  std::int64_t capacity_;
  std::int64_t bandwidth_bps_;
  std::set<std::string> tags_;
  std::map<std::string, std::string> files_;
};

class CatalogResource {
 public:
  CatalogResource(std::string name, std::string org);

  /// Upsert, last writer wins. Auto-creates the table.
  void update(const std::string& table, const std::string& key, Value record);
  /// key lookup (exact) or attribute-equality-conjunction filter.
  Result<std::vector<Value>> query_key(const std::string& table, const std::string& key) const;
  Result<std::vector<Value>> query_filter(const std::string& table,
                                          const ValueRecord& filter) const;

  const std::string& name() const { return name_; }
  const std::string& org() const { return org_; }

 private:
  std::string name_;
  std::string org_;
  std::map<std::string, std::map<std::string, Value>> tables_;
};

enum class HoldState { Tentative, Confirmed };

struct Reservation {
  std::string reservation_id;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::int64_t amount = 0;
  std::string holder;
  HoldState state = HoldState::Tentative;
  std::int64_t created_ms = 0;
};

/// GARA-style slot calendar: tentative/confirmed holds against a fixed
/// capacity; tentative holds expire after hold_timeout_ms.
class SlotCalendar {
 public:
  SlotCalendar(std::string resource, std::int64_t capacity,
               std::int64_t hold_timeout_ms = 30000);

  /// On Conflict the error aux carries the earliest start at which the
  /// same (duration, amount) request would fit.
  Result<Reservation> reserve(std::int64_t now_ms, std::int64_t start_ms,
                              std::int64_t end_ms, std::int64_t amount,
                              const std::string& holder);
  /// Idempotent: confirming a confirmed hold succeeds.
  Result<Reservation> confirm(std::int64_t now_ms, const std::string& reservation_id);
  Status release(std::int64_t now_ms, const std::string& reservation_id);

  /// Drop tentative holds older than the hold timeout.
  void purge(std::int64_t now_ms);
  /// Crash semantics: tentative holds are volatile, confirmed persist.
  void crash(std::int64_t now_ms);

  const std::map<std::string, Reservation>& holds() const { return holds_; }
  std::int64_t capacity() const { return capacity_; }
  /// Load at an instant (tentative + confirmed).
  std::int64_t load_at(std::int64_t t_ms) const;

 private:
  bool fits(std::int64_t start_ms, std::int64_t end_ms, std::int64_t amount) const;

  std::string resource_;
  std::int64_t capacity_;
  std::int64_t hold_timeout_ms_;
  std::map<std::string, Reservation> holds_;
  std::int64_t counter_ = 0;
};

}  // namespace grid

#endif  // GRID_FABRIC_HPP_
