// Deterministic in-memory network with a simulated clock.
//
// Single-threaded: request() pumps the shared event queue until the
// reply arrives or the simulated timeout passes, so handlers may issue
// nested requests. With a fixed (seed, config, workload) the delivery
// trace is replay-identical byte for byte.

#ifndef GRID_SIMNET_HPP_
#define GRID_SIMNET_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "grid/transport.hpp"

namespace grid {

struct PartitionWindow {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::set<std::pair<std::string, std::string>> pairs;  // normalized (min,max) endpoint keys
};

struct SimNetConfig {
  std::uint64_t seed = 1;
  std::int64_t base_latency_ms = 5;
  std::int64_t jitter_ms = 0;
  double loss_probability = 0.0;
  std::vector<PartitionWindow> partition_schedule;
};

// Scheduled fault injections, keyed by global message position.
// Positions count every message send (requests and responses) in order,
// starting at 1.
struct FaultPlan {
  std::set<std::int64_t> drop;         // message silently lost
  std::set<std::int64_t> unreachable;  // request fails fast as Unreachable
  std::set<std::int64_t> duplicate;    // message delivered twice
  std::map<std::int64_t, std::int64_t> delay;  // extra latency (reordering)
};

class SimNet : public Transport {
 public:
  explicit SimNet(SimNetConfig config = {});

  void bind(const EndpointAddress& addr, Handler handler) override;
  void unbind(const EndpointAddress& addr) override;
  Result<Envelope> request(const EndpointAddress& from, const EndpointAddress& to,
                           const Envelope& env, std::int64_t timeout_ms) override;
  std::int64_t now_ms() override { return now_; }
  void sleep_ms(std::int64_t ms) override;

  bool has_listener(const EndpointAddress& addr) const;

  /// Deterministic request-id source ("r1", "r2", ...).
  std::string new_request_id() override { return "r" + std::to_string(++id_counter_); }

  /// Run fn at now + delay_ms.
  void schedule(std::int64_t delay_ms, std::function<void()> fn);
  /// Run fn every period_ms until cancel_periodic. Returns a timer id.
  std::int64_t schedule_every(std::int64_t period_ms, std::function<void()> fn);
  void cancel_periodic(std::int64_t timer_id);

  /// Drain the event queue, advancing the clock, but never past limit.
  void run_until_idle(std::int64_t limit_ms);

  // Dynamic partitions (fault schedule driven).
  void partition(const std::string& endpoint_key_a, const std::string& endpoint_key_b);
  void heal(const std::string& endpoint_key_a, const std::string& endpoint_key_b);

  // Fault injection by message position.
  void set_fault_plan(FaultPlan plan) { faults_ = std::move(plan); }
  std::int64_t messages_sent() const { return msg_counter_; }

  // Trace access. Heavy bulk tests can disable storage and observe
  // entries via callback instead.
  const std::vector<TraceEntry>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }
  void set_trace_enabled(bool on) { trace_enabled_ = on; }
  void set_observer(std::function<void(const TraceEntry&)> fn) { observer_ = std::move(fn); }
  const std::map<std::string, std::int64_t>& protocol_counts() const { return protocol_counts_; }

 private:
  struct Event {
    std::int64_t time;
    std::int64_t seq;
    std::function<void()> fn;
  };
  struct EventCmp {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  struct Pending {
    bool ready = false;
    Envelope reply;
  };

  void push_event(std::int64_t at, std::function<void()> fn);
  /// Process events up to `until`; stops early when stop() is true.
  void pump(std::int64_t until, const std::function<bool()>& stop);
  bool partitioned(const std::string& a, const std::string& b) const;
  void record(TraceEntry entry);
  std::int64_t draw_latency();
  bool draw_loss();

  SimNetConfig config_;
  std::int64_t now_ = 0;
  std::int64_t seq_counter_ = 0;
  std::int64_t id_counter_ = 0;
  std::int64_t msg_counter_ = 0;
  std::int64_t timer_counter_ = 0;
  std::mt19937_64 rng_;
  std::priority_queue<Event, std::vector<Event>, EventCmp> events_;
  std::map<std::string, Handler> listeners_;
  std::map<std::int64_t, std::shared_ptr<Pending>> pending_;
  std::set<std::pair<std::string, std::string>> dynamic_partitions_;
  std::set<std::int64_t> cancelled_timers_;
  FaultPlan faults_;
  bool trace_enabled_ = true;
  std::vector<TraceEntry> trace_;
  std::function<void(const TraceEntry&)> observer_;
  std::map<std::string, std::int64_t> protocol_counts_;
};

}  // namespace grid

#endif  // GRID_SIMNET_HPP_
