#include "grid/client.hpp"

namespace grid {

Value JobSpec::to_payload(const EndpointAddress&) const {
  ValueRecord job;
  job["executable"] = executable;
  job["work_units"] = work_units;
  ValueList in;
  for (const auto& i : inputs) in.push_back(Value(i));
  job["inputs"] = Value(std::move(in));
  job["output"] = output;
  job["vo"] = vo;
  job["constraints"] = Value(constraints);

  ValueRecord p;
  p["job"] = Value(std::move(job));
  if (stage_source) {
    ValueList paths;
    for (const auto& s : stage_paths) paths.push_back(Value(s));
    p["stage_from"] = Value(ValueRecord{{"endpoint", stage_source->to_value()},
                                        {"paths", Value(std::move(paths))}});
  }
  if (capability) p["capability"] = capability->to_value();
  return Value(std::move(p));
}

GridClient::GridClient(Transport& net, EndpointAddress self, std::shared_ptr<KeyStore> keys,
                       TrustStore trust, Chain chain)
    : client_(net, std::move(self), std::move(keys), std::move(trust)),
      chain_(std::move(chain)) {}

Result<Value> GridClient::call(const EndpointAddress& host, const char* protocol,
                               const std::string& type, Value payload, std::string request_id) {
  if (request_id.empty()) request_id = client_.new_request_id();
  auto reply = client_.call_ok(host, chain_, protocol, type, std::move(payload), request_id);
  if (!reply.ok()) return reply.error();
  return reply->payload;
}

Result<std::string> GridClient::allocate(const EndpointAddress& host, const JobSpec& job,
                                         std::string request_id) {
  auto out = call(host, proto::kMgmt, "ALLOCATE", job.to_payload(), std::move(request_id));
  if (!out.ok()) return out.error();
  return out->string_or("job_id", "");
}

Result<Value> GridClient::job_status(const EndpointAddress& host, const std::string& job_id) {
  return call(host, proto::kMgmt, "STATUS", Value(ValueRecord{{"job_id", Value(job_id)}}));
}

Result<Value> GridClient::cancel(const EndpointAddress& host, const std::string& job_id) {
  return call(host, proto::kMgmt, "CANCEL", Value(ValueRecord{{"job_id", Value(job_id)}}));
}

Result<std::vector<Value>> GridClient::query_descriptors(const EndpointAddress& host,
                                                         const ValueRecord& filter) {
  ValueRecord p;
  if (!filter.empty()) p["filter"] = Value(filter);
  auto out = call(host, proto::kInfo, "QUERY", Value(std::move(p)));
  if (!out.ok()) return out.error();
  std::vector<Value> descs;
  if (const Value* d = out->find("descriptors"); d && d->is_list())
    descs.assign(d->as_list().begin(), d->as_list().end());
  return descs;
}

Result<std::int64_t> GridClient::stat_file(const EndpointAddress& host, const std::string& path) {
  auto out = call(host, proto::kInfo, "QUERY", Value(ValueRecord{{"file", Value(path)}}));
  if (!out.ok()) return out.error();
  const Value* f = out->find("file");
  if (!f || !f->is_record()) return make_error(Err::Malformed, "stat reply");
  return f->int_or("size", 0);
}

Result<std::vector<Value>> GridClient::catalog_query(const EndpointAddress& host,
                                                     const std::string& table,
                                                     const std::optional<std::string>& key,
                                                     const ValueRecord& filter) {
  ValueRecord p;
  p["table"] = table;
  if (key) p["key"] = *key;
  else p["filter"] = Value(filter);
  auto out = call(host, proto::kInfo, "QUERY", Value(std::move(p)));
  if (!out.ok()) return out.error();
  std::vector<Value> rows;
  if (const Value* r = out->find("records"); r && r->is_list())
    rows.assign(r->as_list().begin(), r->as_list().end());
  return rows;
}

Status GridClient::catalog_update(const EndpointAddress& host, const std::string& table,
                                  const std::string& key, Value record) {
  ValueRecord p;
  p["table"] = table;
  p["key"] = key;
  p["record"] = std::move(record);
  auto out = call(host, proto::kInfo, "UPDATE", Value(std::move(p)));
  if (!out.ok()) return out.error();
  return ok_status();
}

Result<Value> GridClient::transfer(const EndpointAddress& source, const std::string& source_path,
                                   const EndpointAddress& dest, const std::string& dest_path,
                                   const std::string& vo, std::int64_t streams,
                                   std::optional<std::int64_t> offset,
                                   std::optional<std::int64_t> length) {
  ValueRecord src;
  src["path"] = source_path;
  if (offset) src["offset"] = *offset;
  if (length) src["length"] = *length;
  ValueRecord p;
  p["source"] = Value(std::move(src));
  p["dest"] = Value(ValueRecord{{"endpoint", dest.to_value()}, {"path", Value(dest_path)}});
  p["vo"] = vo;
  p["streams"] = streams;
  return call(source, proto::kData, "XFER", Value(std::move(p)));
}

Result<std::string> GridClient::reserve(const EndpointAddress& host, std::int64_t start_ms,
                                        std::int64_t end_ms, std::int64_t amount,
                                        const std::string& vo, std::string request_id) {
  ValueRecord p;
  p["start_ms"] = start_ms;
  p["end_ms"] = end_ms;
  p["amount"] = amount;
  p["vo"] = vo;
  auto out = call(host, proto::kMgmt, "RESERVE", Value(std::move(p)), std::move(request_id));
  if (!out.ok()) return out.error();
  return out->string_or("reservation_id", "");
}

Status GridClient::confirm(const EndpointAddress& host, const std::string& reservation_id) {
  auto out = call(host, proto::kMgmt, "CONFIRM",
                  Value(ValueRecord{{"reservation_id", Value(reservation_id)}}));
  if (!out.ok()) return out.error();
  return ok_status();
}

Status GridClient::release(const EndpointAddress& host, const std::string& reservation_id) {
  auto out = call(host, proto::kMgmt, "RELEASE",
                  Value(ValueRecord{{"reservation_id", Value(reservation_id)}}));
  if (!out.ok()) return out.error();
  return ok_status();
}

}  // namespace grid
