#include "grid/broker.hpp"

#include <algorithm>

namespace grid {

namespace {

bool meets(const Value& d, const Requirements& req) {
  if (!req.type.empty()) {
    bool found = false;
    if (const Value* services = d.find("services"); services && services->is_list())
      for (const Value& s : services->as_list())
        if (s.is_string() && s.as_string() == req.type) found = true;
    if (!found) return false;
  }
  if (d.int_or("free_slots", 0) < req.min_slots) return false;
  if (d.int_or("queue_length", 0) > req.max_queue) return false;
  for (const auto& tag : req.tags) {
    bool found = false;
    if (const Value* tags = d.find("tags"); tags && tags->is_list())
      for (const Value& t : tags->as_list())
        if (t.is_string() && t.as_string() == tag) found = true;
    if (!found) return false;
  }
  return true;
}

}  // namespace

std::vector<Value> rank_descriptors(const std::vector<Value>& descriptors,
                                    const Requirements& req) {
  std::vector<Value> out;
  for (const Value& d : descriptors)
    if (d.is_record() && meets(d, req)) out.push_back(d);
  std::stable_sort(out.begin(), out.end(), [](const Value& a, const Value& b) {
    std::int64_t fa = a.int_or("free_slots", 0), fb = b.int_or("free_slots", 0);
    if (fa != fb) return fa > fb;
    std::int64_t qa = a.int_or("queue_length", 0), qb = b.int_or("queue_length", 0);
    if (qa != qb) return qa < qb;
    return a.string_or("name", "") < b.string_or("name", "");
  });
  return out;
}

Result<std::vector<Value>> discover_and_rank(GridClient& client, const EndpointAddress& index,
                                             const Requirements& req) {
  auto descs = client.query_descriptors(index);
  if (!descs.ok()) return descs.error();
  return rank_descriptors(*descs, req);
}

Value ReplicaCopy::to_value() const {
  ValueRecord r;
  r["endpoint"] = endpoint.to_value();
  r["path"] = path;
  r["latency_ms"] = latency_ms;
  r["load_pct"] = load_pct;
  return Value(std::move(r));
}

ReplicaCopy ReplicaCopy::from_value(const Value& v) {
  ReplicaCopy c;
  if (const Value* ep = v.find("endpoint")) c.endpoint = EndpointAddress::from_value(*ep);
  c.path = v.string_or("path", "");
  c.latency_ms = v.int_or("latency_ms", 0);
  c.load_pct = v.int_or("load_pct", 0);
  return c;
}

Status replica_register(GridClient& client, const EndpointAddress& catalog,
                        const std::string& logical, const ReplicaCopy& copy, std::int64_t size) {
  if (size <= 0) return make_error(Err::SizeMismatch, "size must be positive", size);
  auto actual = client.stat_file(copy.endpoint, copy.path);
  if (!actual.ok()) return actual.error();
  if (*actual != size) return make_error(Err::SizeMismatch, logical, *actual);

  ValueList copies;
  auto rows = client.catalog_query(catalog, "replicas", logical);
  if (rows.ok() && !rows->empty()) {
    const Value& existing = rows->front();
    if (existing.int_or("size", -1) != size)
      return make_error(Err::SizeMismatch, logical, existing.int_or("size", -1));
    if (const Value* c = existing.find("copies"); c && c->is_list()) copies = c->as_list();
  }
  for (const Value& c : copies)
    if (ReplicaCopy::from_value(c).endpoint == copy.endpoint &&
        ReplicaCopy::from_value(c).path == copy.path)
      return ok_status();  // already listed
  copies.push_back(copy.to_value());

  ValueRecord row;
  row["size"] = size;
  row["copies"] = Value(std::move(copies));
  return client.catalog_update(catalog, "replicas", logical, Value(std::move(row)));
}

Result<std::vector<ReplicaCopy>> replica_locate(GridClient& client,
                                                const EndpointAddress& catalog,
                                                const std::string& logical) {
  auto rows = client.catalog_query(catalog, "replicas", logical);
  if (!rows.ok()) {
    if (rows.code() == Err::UnknownTable) return make_error(Err::UnknownLogical, logical);
    return rows.error();
  }
  if (rows->empty()) return make_error(Err::UnknownLogical, logical);
  std::vector<ReplicaCopy> out;
  if (const Value* c = rows->front().find("copies"); c && c->is_list())
    for (const Value& item : c->as_list()) out.push_back(ReplicaCopy::from_value(item));
  if (out.empty()) return make_error(Err::UnknownLogical, logical);
  return out;
}

Result<std::int64_t> replica_size(GridClient& client, const EndpointAddress& catalog,
                                  const std::string& logical) {
  auto rows = client.catalog_query(catalog, "replicas", logical);
  if (!rows.ok() || rows->empty()) return make_error(Err::UnknownLogical, logical);
  return rows->front().int_or("size", 0);
}

Result<ReplicaCopy> replica_select(const std::vector<ReplicaCopy>& copies) {
  if (copies.empty()) return make_error(Err::UnknownLogical, "no copies");
  const ReplicaCopy* best = nullptr;
  for (const ReplicaCopy& c : copies) {
    if (!best) {
      best = &c;
      continue;
    }
    // cost = latency x (1 + load); with integer percent load this is
    // latency x (100 + load_pct) up to a constant factor
    std::int64_t cost = c.latency_ms * (100 + c.load_pct);
    std::int64_t best_cost = best->latency_ms * (100 + best->load_pct);
    if (cost < best_cost || (cost == best_cost && c.endpoint.name < best->endpoint.name))
      best = &c;
  }
  return *best;
}

}  // namespace grid
