#include "grid/fabric.hpp"

#include <algorithm>

namespace grid {

const char* task_state_name(TaskState s) {
  switch (s) {
    case TaskState::Queued: return "queued";
    case TaskState::Running: return "running";
    case TaskState::Done: return "done";
    case TaskState::Failed: return "failed";
    case TaskState::Cancelled: return "cancelled";
  }
  return "queued";
}

ComputeResource::ComputeResource(std::string name, std::string org, int total_slots,
                                 std::int64_t slot_speed_units_per_s,
                                 std::set<std::string> tags)
    : name_(std::move(name)),
      org_(std::move(org)),
      total_slots_(total_slots),
      slot_speed_(std::max<std::int64_t>(1, slot_speed_units_per_s)),
      tags_(std::move(tags)),
      slot_free_at_(static_cast<std::size_t>(total_slots), 0) {}

std::string ComputeResource::start_task(std::int64_t now_ms, std::int64_t work_units,
                                        const std::string& executable,
                                        const std::vector<std::string>& inputs,
                                        const std::string& output_path) {
  advance(now_ms);
  Task t;
  t.task_id = name_ + "-t" + std::to_string(++task_counter_);
  t.work_units = work_units;
  t.executable = executable;
  t.inputs = inputs;
  t.output_path = output_path;
  t.submitted_ms = now_ms;
  tasks_[t.task_id] = t;
  queue_.push_back(t.task_id);
  return t.task_id;
}

std::vector<Task> ComputeResource::advance(std::int64_t now_ms) {
  std::vector<Task> completed;
  // admit queued tasks in FIFO order as slots free up
  while (!queue_.empty()) {
    auto min_it = std::min_element(slot_free_at_.begin(), slot_free_at_.end());
    Task& t = tasks_[queue_.front()];
    std::int64_t start = std::max(*min_it, t.submitted_ms);
    if (start > now_ms) break;
    std::int64_t duration = (t.work_units * 1000 + slot_speed_ - 1) / slot_speed_;
    t.state = TaskState::Running;
    t.started_ms = start;
    t.finished_ms = start + duration;
    std::size_t slot = static_cast<std::size_t>(min_it - slot_free_at_.begin());
    *min_it = t.finished_ms;
    running_slot_[t.task_id] = slot;
    queue_.pop_front();
  }
  // complete running tasks whose finish time has passed
  for (auto it = running_slot_.begin(); it != running_slot_.end();) {
    Task& t = tasks_[it->first];
    if (t.finished_ms <= now_ms) {
      t.state = TaskState::Done;
      used_work_units_ += t.work_units;
      completed.push_back(t);
      it = running_slot_.erase(it);
    } else {
      ++it;
    }
  }
  std::sort(completed.begin(), completed.end(),
            [](const Task& a, const Task& b) { return a.finished_ms < b.finished_ms; });
  return completed;
}

Result<TaskState> ComputeResource::task_status(std::int64_t now_ms, const std::string& id) {
  advance(now_ms);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return make_error(Err::UnknownTask, id);
  return it->second.state;
}

Result<Task> ComputeResource::task_record(std::int64_t now_ms, const std::string& id) {
  advance(now_ms);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return make_error(Err::UnknownTask, id);
  return it->second;
}

Result<TaskState> ComputeResource::cancel_task(std::int64_t now_ms, const std::string& id) {
  advance(now_ms);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return make_error(Err::UnknownTask, id);
  Task& t = it->second;
  switch (t.state) {
    case TaskState::Queued: {
      t.state = TaskState::Cancelled;
      t.finished_ms = now_ms;
      queue_.erase(std::remove(queue_.begin(), queue_.end(), id), queue_.end());
      break;
    }
    case TaskState::Running: {
      t.state = TaskState::Cancelled;
      t.finished_ms = now_ms;
      auto rs = running_slot_.find(id);
      if (rs != running_slot_.end()) {
        slot_free_at_[rs->second] = now_ms;
        running_slot_.erase(rs);
      }
      break;
    }
    default:
      break;  // terminal: idempotent, return the state as is
  }
  return t.state;
}

int ComputeResource::free_slots(std::int64_t now_ms) {
  advance(now_ms);
  int n = 0;
  for (std::int64_t f : slot_free_at_)
    if (f <= now_ms) n++;
  return n;
}

int ComputeResource::queue_length(std::int64_t now_ms) {
  advance(now_ms);
  return static_cast<int>(queue_.size());
}

void ComputeResource::crash(std::int64_t now_ms) {
  advance(now_ms);
  for (auto& [id, t] : tasks_) {
    if (t.state == TaskState::Queued || t.state == TaskState::Running) {
      t.state = TaskState::Failed;
      t.finished_ms = now_ms;
    }
  }
  queue_.clear();
  running_slot_.clear();
  std::fill(slot_free_at_.begin(), slot_free_at_.end(), now_ms);
}

StorageResource::StorageResource(std::string name, std::string org,
                                 std::int64_t capacity_bytes, std::int64_t bandwidth_bps,
                                 std::set<std::string> tags)
    : name_(std::move(name)),
      org_(std::move(org)),
      capacity_(capacity_bytes),
      bandwidth_bps_(bandwidth_bps),
      tags_(std::move(tags)) {}

Result<std::string> StorageResource::normalize_path(const std::string& path) {
  if (path.empty() || path[0] != '/')
    return make_error(Err::ValidationError, "path must be absolute: " + path);
  std::string out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') i++;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') j++;
    std::string seg = path.substr(i, j - i);
    if (seg == "." || seg == "..")
      return make_error(Err::ValidationError, "dot segments forbidden: " + path);
    if (!seg.empty()) out += "/" + seg;
    i = j;
  }
  if (out.empty()) out = "/";
  return out;
}

std::int64_t StorageResource::used_bytes() const {
  std::int64_t n = 0;
  for (const auto& [_, content] : files_) n += static_cast<std::int64_t>(content.size());
  return n;
}

Status StorageResource::put_file(const std::string& path, const std::string& content) {
  auto norm = normalize_path(path);
  if (!norm) return norm.error();
  std::int64_t old_size = 0;
  auto it = files_.find(*norm);
  if (it != files_.end()) old_size = static_cast<std::int64_t>(it->second.size());
  if (used_bytes() - old_size + static_cast<std::int64_t>(content.size()) > capacity_)
    return make_error(Err::NoSpace, *norm);
  files_[*norm] = content;
  return ok_status();
}

Result<std::string> StorageResource::get_file(const std::string& path) const {
  auto norm = normalize_path(path);
  if (!norm) return norm.error();
  auto it = files_.find(*norm);
  if (it == files_.end()) return make_error(Err::NotFound, *norm);
  return it->second;
}

Result<std::string> StorageResource::read_range(const std::string& path,
                                                std::int64_t offset,
                                                std::int64_t length) const {
  if (offset < 0) return make_error(Err::NegativeOffset, path);
  if (length < 0) return make_error(Err::ValidationError, "negative length");
  auto content = get_file(path);
  if (!content) return content;
  std::int64_t size = static_cast<std::int64_t>(content->size());
  if (offset >= size) return std::string();
  std::int64_t end = std::min(size, offset + length);
  return content->substr(static_cast<std::size_t>(offset),
                         static_cast<std::size_t>(end - offset));
}

Result<std::int64_t> StorageResource::file_size(const std::string& path) const {
  auto content = get_file(path);
  if (!content) return content.error();
  return static_cast<std::int64_t>(content->size());
}

Status StorageResource::remove_file(const std::string& path) {
  auto norm = normalize_path(path);
  if (!norm) return norm.error();
  if (files_.erase(*norm) == 0) return make_error(Err::NotFound, *norm);
  return ok_status();
}

CatalogResource::CatalogResource(std::string name, std::string org)
    : name_(std::move(name)), org_(std::move(org)) {}

void CatalogResource::update(const std::string& table, const std::string& key,
                             Value record) {
  tables_[table][key] = std::move(record);  // auto-create table, last writer wins
}

Result<std::vector<Value>> CatalogResource::query_key(const std::string& table,
                                                      const std::string& key) const {
  auto t = tables_.find(table);
  if (t == tables_.end()) return make_error(Err::UnknownTable, table);
  std::vector<Value> out;
  auto it = t->second.find(key);
  if (it != t->second.end()) out.push_back(it->second);
  return out;
}

Result<std::vector<Value>> CatalogResource::query_filter(const std::string& table,
                                                         const ValueRecord& filter) const {
  auto t = tables_.find(table);
  if (t == tables_.end()) return make_error(Err::UnknownTable, table);
  std::vector<Value> out;
  for (const auto& [key, record] : t->second) {
    bool match = true;
    for (const auto& [attr, want] : filter) {
      const Value* got = record.find(attr);
      if (!got || !(*got == want)) {
        match = false;
        break;
      }
    }
    if (match) out.push_back(record);
  }
  return out;
}

SlotCalendar::SlotCalendar(std::string resource, std::int64_t capacity,
                           std::int64_t hold_timeout_ms)
    : resource_(std::move(resource)), capacity_(capacity), hold_timeout_ms_(hold_timeout_ms) {}

std::int64_t SlotCalendar::load_at(std::int64_t t_ms) const {
  std::int64_t load = 0;
  for (const auto& [_, h] : holds_)
    if (h.start_ms <= t_ms && t_ms < h.end_ms) load += h.amount;
  return load;
}

bool SlotCalendar::fits(std::int64_t start_ms, std::int64_t end_ms,
                        std::int64_t amount) const {
  if (amount > capacity_) return false;
  if (load_at(start_ms) + amount > capacity_) return false;
  for (const auto& [_, h] : holds_) {
    if (h.start_ms > start_ms && h.start_ms < end_ms) {
      if (load_at(h.start_ms) + amount > capacity_) return false;
    }
  }
  return true;
}

Result<Reservation> SlotCalendar::reserve(std::int64_t now_ms, std::int64_t start_ms,
                                          std::int64_t end_ms, std::int64_t amount,
                                          const std::string& holder) {
  purge(now_ms);
  if (start_ms >= end_ms) return make_error(Err::ValidationError, "empty window");
  if (amount < 1) return make_error(Err::ValidationError, "amount must be >= 1");
  if (!fits(start_ms, end_ms, amount)) {
    // earliest-fit hint: try the requested start shifted to each hold
    // end time, in order
    std::int64_t duration = end_ms - start_ms;
    std::int64_t earliest = -1;
    if (amount <= capacity_) {
      std::vector<std::int64_t> candidates;
      for (const auto& [_, h] : holds_)
        if (h.end_ms > start_ms) candidates.push_back(h.end_ms);
      std::sort(candidates.begin(), candidates.end());
      for (std::int64_t c : candidates) {
        if (fits(c, c + duration, amount)) {
          earliest = c;
          break;
        }
      }
    }
    return make_error(Err::Conflict, resource_, earliest);
  }
  Reservation r;
  r.reservation_id = resource_ + "-hold" + std::to_string(++counter_);
  r.start_ms = start_ms;
  r.end_ms = end_ms;
  r.amount = amount;
  r.holder = holder;
  r.state = HoldState::Tentative;
  r.created_ms = now_ms;
  holds_[r.reservation_id] = r;
  return r;
}

Result<Reservation> SlotCalendar::confirm(std::int64_t now_ms,
                                          const std::string& reservation_id) {
  purge(now_ms);
  auto it = holds_.find(reservation_id);
  if (it == holds_.end()) return make_error(Err::UnknownReservation, reservation_id);
  it->second.state = HoldState::Confirmed;  // idempotent
  return it->second;
}

Status SlotCalendar::release(std::int64_t now_ms, const std::string& reservation_id) {
  purge(now_ms);
  auto it = holds_.find(reservation_id);
  if (it == holds_.end()) return make_error(Err::UnknownReservation, reservation_id);
  holds_.erase(it);
  return ok_status();
}

void SlotCalendar::purge(std::int64_t now_ms) {
  for (auto it = holds_.begin(); it != holds_.end();) {
    if (it->second.state == HoldState::Tentative &&
        it->second.created_ms + hold_timeout_ms_ <= now_ms) {
      it = holds_.erase(it);
    } else {
      ++it;
    }
  }
}

void SlotCalendar::crash(std::int64_t now_ms) {
  (void)now_ms;
  for (auto it = holds_.begin(); it != holds_.end();) {
    if (it->second.state == HoldState::Tentative) it = holds_.erase(it);
    else ++it;
  }
}

}  // namespace grid
