#include "grid/simnet.hpp"

#include <cassert>

namespace grid {

namespace {

std::pair<std::string, std::string> norm_pair(const std::string& a, const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

SimNet::SimNet(SimNetConfig config) : config_(std::move(config)), rng_(config_.seed) {}

void SimNet::bind(const EndpointAddress& addr, Handler handler) {
  listeners_[addr.key()] = std::move(handler);
}

void SimNet::unbind(const EndpointAddress& addr) { listeners_.erase(addr.key()); }

bool SimNet::has_listener(const EndpointAddress& addr) const {
  return listeners_.count(addr.key()) != 0;
}

std::int64_t SimNet::draw_latency() {
  std::int64_t jitter = 0;
  if (config_.jitter_ms > 0) {
    std::uniform_int_distribution<std::int64_t> d(0, config_.jitter_ms);
    jitter = d(rng_);
  }
  return config_.base_latency_ms + jitter;
}

bool SimNet::draw_loss() {
  if (config_.loss_probability <= 0.0) return false;
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng_) < config_.loss_probability;
}

bool SimNet::partitioned(const std::string& a, const std::string& b) const {
  auto p = norm_pair(a, b);
  if (dynamic_partitions_.count(p)) return true;
  for (const auto& w : config_.partition_schedule) {
    if (now_ >= w.start_ms && now_ < w.end_ms && w.pairs.count(p)) return true;
  }
  return false;
}

void SimNet::record(TraceEntry entry) {
  protocol_counts_[entry.protocol]++;
  if (observer_) observer_(entry);
  if (trace_enabled_) trace_.push_back(std::move(entry));
}

void SimNet::push_event(std::int64_t at, std::function<void()> fn) {
  events_.push(Event{at, ++seq_counter_, std::move(fn)});
}

void SimNet::pump(std::int64_t until, const std::function<bool()>& stop) {
  while (true) {
    if (stop && stop()) return;
    if (events_.empty() || events_.top().time > until) {
      if (now_ < until) now_ = until;
      return;
    }
    Event ev = events_.top();
    events_.pop();
    if (ev.time > now_) now_ = ev.time;
    ev.fn();
  }
}

Result<Envelope> SimNet::request(const EndpointAddress& from, const EndpointAddress& to,
                                 const Envelope& env, std::int64_t timeout_ms) {
  std::int64_t pos = ++msg_counter_;
  TraceEntry te;
  te.seq = pos;
  te.time_ms = now_;
  te.from = from.key();
  te.to = to.key();
  te.protocol = env.protocol;
  te.message_type = env.message_type;
  te.request_id = env.request_id;
  te.is_response = false;

  bool forced_unreachable = faults_.unreachable.count(pos) != 0;
  if (forced_unreachable || partitioned(from.key(), to.key()) ||
      listeners_.find(to.key()) == listeners_.end()) {
    te.status = "unreachable";
    record(std::move(te));
    // keep rng draw parity with the delivered path
    draw_latency();
    draw_loss();
    return make_error(Err::Unreachable, to.key());
  }

  std::int64_t latency = draw_latency();
  bool dropped = draw_loss() || faults_.drop.count(pos) != 0;
  auto delay_it = faults_.delay.find(pos);
  if (delay_it != faults_.delay.end()) latency += delay_it->second;
  int copies = faults_.duplicate.count(pos) ? 2 : 1;

  te.status = dropped ? "dropped" : "delivered";
  record(std::move(te));

  auto pending = std::make_shared<Pending>();
  std::int64_t pkey = pos;
  pending_[pkey] = pending;

  if (!dropped) {
    for (int copy = 0; copy < copies; copy++) {
      std::int64_t deliver_at = now_ + latency + copy;  // duplicate trails by 1ms
      push_event(deliver_at, [this, env, from, to, pending]() {
        auto it = listeners_.find(to.key());
        if (it == listeners_.end()) return;  // crashed before delivery
        Envelope reply = it->second(env);

        std::int64_t rpos = ++msg_counter_;
        TraceEntry rt;
        rt.seq = rpos;
        rt.time_ms = now_;
        rt.from = to.key();
        rt.to = from.key();
        rt.protocol = reply.protocol;
        rt.message_type = reply.message_type;
        rt.request_id = reply.request_id;
        rt.is_response = true;

        if (partitioned(from.key(), to.key())) {
          rt.status = "unreachable";
          record(std::move(rt));
          draw_latency();
          draw_loss();
          return;
        }
        std::int64_t rlatency = draw_latency();
        bool rdropped = draw_loss() || faults_.drop.count(rpos) != 0 ||
                        faults_.unreachable.count(rpos) != 0;
        auto rdelay = faults_.delay.find(rpos);
        if (rdelay != faults_.delay.end()) rlatency += rdelay->second;
        rt.status = rdropped ? "dropped" : "delivered";
        record(std::move(rt));
        if (!rdropped) {
          push_event(now_ + rlatency, [pending, reply]() {
            pending->ready = true;
            pending->reply = reply;
          });
        }
      });
    }
  }

  std::int64_t deadline = now_ + timeout_ms;
  pump(deadline, [pending]() { return pending->ready; });
  pending_.erase(pkey);
  if (pending->ready) return pending->reply;
  return make_error(Err::Timeout, to.key());
}

void SimNet::sleep_ms(std::int64_t ms) { pump(now_ + ms, nullptr); }

void SimNet::schedule(std::int64_t delay_ms, std::function<void()> fn) {
  push_event(now_ + delay_ms, std::move(fn));
}

std::int64_t SimNet::schedule_every(std::int64_t period_ms, std::function<void()> fn) {
  std::int64_t id = ++timer_counter_;
  auto user = std::make_shared<std::function<void()>>(std::move(fn));
  auto body = std::make_shared<std::function<void()>>();
  *body = [this, id, period_ms, user, body]() {
    if (cancelled_timers_.count(id)) return;
    (*user)();
    push_event(now_ + period_ms, *body);
  };
  push_event(now_ + period_ms, *body);
  return id;
}

void SimNet::cancel_periodic(std::int64_t timer_id) {
  cancelled_timers_.insert(timer_id);
}

void SimNet::run_until_idle(std::int64_t limit_ms) { pump(limit_ms, nullptr); }

void SimNet::partition(const std::string& a, const std::string& b) {
  dynamic_partitions_.insert(norm_pair(a, b));
}

void SimNet::heal(const std::string& a, const std::string& b) {
  dynamic_partitions_.erase(norm_pair(a, b));
}

}  // namespace grid
