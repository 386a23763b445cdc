#include "grid/host.hpp"

#include <algorithm>

namespace grid {

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::Staging: return "staging";
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    case JobState::Cancelled: return "cancelled";
  }
  return "?";
}

Value JobRecord::to_value() const {
  ValueRecord r;
  r["job_id"] = job_id;
  r["request_id"] = request_id;
  r["owner"] = owner;
  r["local_account"] = local_account;
  r["vo"] = vo;
  r["task_id"] = task_id;
  r["work_units"] = work_units;
  r["executable"] = executable;
  r["output_path"] = output_path;
  r["submitted_ms"] = submitted_ms;
  return Value(std::move(r));
}

ResourceHost::ResourceHost(Transport& net, std::shared_ptr<KeyStore> keys, Chain service_chain,
                           HostConfig config, FabricLog* log)
    : net_(net),
      keys_(keys),
      chain_(std::move(service_chain)),
      config_(std::move(config)),
      log_(log ? log : &own_log_),
      auth_(keys, config_.trust, chain_) {}

void ResourceHost::attach_compute(int slots, std::int64_t slot_speed_units_per_s,
                                  std::set<std::string> tags) {
  compute_.emplace(config_.name, config_.org, slots, slot_speed_units_per_s, std::move(tags));
}

void ResourceHost::attach_storage(std::int64_t capacity_bytes, std::set<std::string> tags) {
  storage_.emplace(config_.name, config_.org, capacity_bytes, 0, std::move(tags));
}

void ResourceHost::attach_catalog() { catalog_.emplace(config_.name, config_.org); }

void ResourceHost::set_calendar_capacity(std::int64_t capacity, std::int64_t hold_timeout_ms) {
  calendar_.emplace(config_.name, capacity, hold_timeout_ms);
}

void ResourceHost::start() {
  std::string kind = (!compute_ && !catalog_ && storage_) ? "storage" : "resource-host";
  addr_ = EndpointAddress{config_.org, kind, config_.name};
  client_.emplace(net_, addr_, keys_, config_.trust);
  net_.bind(addr_, [this](const Envelope& req) { return handle(req); });
  alive_ = true;
}

void ResourceHost::crash() {
  if (!alive_) return;
  alive_ = false;
  net_.unbind(addr_);
  std::int64_t now = net_.now_ms();
  auth_.clear_sessions();
  client_.reset();
  transfers_.clear();
  if (compute_) compute_->crash(now);
  if (calendar_) calendar_->crash(now);
  log_->append(now, config_.name, "crash", "");
}

void ResourceHost::restart() {
  if (alive_) return;
  client_.emplace(net_, addr_, keys_, config_.trust);
  net_.bind(addr_, [this](const Envelope& req) { return handle(req); });
  alive_ = true;
  log_->append(net_.now_ms(), config_.name, "restart", "");
}

Value ResourceHost::descriptor() {
  std::int64_t now = net_.now_ms();
  settle(now);
  ValueRecord d;
  d["name"] = config_.name;
  d["org"] = config_.org;
  d["endpoint"] = addr_.to_value();
  ValueList services;
  std::set<std::string> tags;
  if (compute_) {
    services.push_back(Value(std::string("compute")));
    d["total_slots"] = std::int64_t{compute_->total_slots()};
    d["free_slots"] = std::int64_t{compute_->free_slots(now)};
    d["queue_length"] = std::int64_t{compute_->queue_length(now)};
    for (const auto& t : compute_->tags()) tags.insert(t);
  }
  if (storage_) {
    services.push_back(Value(std::string("storage")));
    d["capacity_bytes"] = storage_->capacity();
    d["free_bytes"] = storage_->free_bytes();
    for (const auto& t : storage_->tags()) tags.insert(t);
  }
  if (catalog_) services.push_back(Value(std::string("catalog")));
  d["services"] = Value(std::move(services));
  ValueList tag_list;
  for (const auto& t : tags) tag_list.push_back(Value(t));
  d["tags"] = Value(std::move(tag_list));
  d["certified"] = tags.count("certified") != 0;
  std::int64_t load = compute_ ? compute_->queue_length(now) : 0;
  load += static_cast<std::int64_t>(transfers_.size());
  d["load"] = load;
  d["policy_rules"] = static_cast<std::int64_t>(config_.policy.size());
  return Value(std::move(d));
}

Result<std::int64_t> ResourceHost::register_with(const EndpointAddress& index,
                                                 std::int64_t ttl_ms, std::string request_id) {
  ValueRecord p;
  p["descriptor"] = descriptor();
  p["ttl_ms"] = ttl_ms;
  if (request_id.empty()) request_id = net_.new_request_id();
  auto reply = client_->call_ok(index, chain_, proto::kGrrp, "REGISTER", Value(std::move(p)),
                                request_id);
  if (!reply.ok()) return reply.error();
  generation_ = reply->payload.int_or("generation", 0);
  return generation_;
}

Status ResourceHost::refresh_with(const EndpointAddress& index, std::int64_t ttl_ms) {
  ValueRecord p;
  p["descriptor"] = descriptor();
  p["ttl_ms"] = ttl_ms;
  auto reply = client_->call_ok(index, chain_, proto::kGrrp, "REFRESH", Value(std::move(p)),
                                net_.new_request_id());
  if (!reply.ok()) return reply.error();
  generation_ = reply->payload.int_or("generation", generation_);
  return ok_status();
}

Status ResourceHost::unregister_with(const EndpointAddress& index) {
  ValueRecord p;
  p["endpoint"] = addr_.to_value();
  auto reply = client_->call_ok(index, chain_, proto::kGrrp, "UNREGISTER", Value(std::move(p)),
                                net_.new_request_id());
  if (!reply.ok()) return reply.error();
  return ok_status();
}

Result<JobState> ResourceHost::job_state(const std::string& job_id) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return make_error(Err::UnknownJob, job_id);
  if (it->second.task_id.empty()) return JobState::Failed;
  auto st = compute_->task_status(net_.now_ms(), it->second.task_id);
  if (!st.ok()) return st.error();
  switch (*st) {
    case TaskState::Queued: return JobState::Queued;
    case TaskState::Running: return JobState::Running;
    case TaskState::Done: return JobState::Done;
    case TaskState::Failed: return JobState::Failed;
    case TaskState::Cancelled: return JobState::Cancelled;
  }
  return JobState::Failed;
}

Envelope ResourceHost::sign_reply(Envelope e) {
  e.signature = keys_->sign(envelope_signing_bytes(e), chain_.leaf().key_handle);
  return e;
}

void ResourceHost::settle(std::int64_t now_ms) {
  if (calendar_) calendar_->purge(now_ms);
  if (!compute_) return;
  for (const Task& done : compute_->advance(now_ms)) {
    log_->append(done.finished_ms, config_.name, "task_done", done.task_id);
    if (!done.output_path.empty() && storage_) {
      std::string content =
          "result " + done.task_id + " " + std::to_string(done.work_units) + "\n";
      (void)storage_->put_file(done.output_path, content);
    }
  }
}

Envelope ResourceHost::handle(const Envelope& req) {
  std::int64_t now = net_.now_ms();
  settle(now);
  const std::string& me = config_.name;
  if (auth_.is_auth_message(req)) return auth_.handle(req, now);
  auto session = auth_.verify_request(req, now);
  if (!session.ok()) return sign_reply(make_error_reply(req, session.error(), me, "auth"));

  if (req.protocol == proto::kInfo) return handle_info(req, *session);
  if (req.protocol == proto::kMgmt) return handle_mgmt(req, *session);
  if (req.protocol == proto::kData) return handle_data(req, *session);
  return sign_reply(
      make_error_reply(req, make_error(Err::Malformed, "unknown protocol " + req.protocol), me));
}

Result<std::string> ResourceHost::authorize(const AuthServer::SessionInfo& s,
                                            const std::string& operation, const std::string& vo,
                                            const std::map<std::string, Value>& context,
                                            const std::optional<Capability>& cap,
                                            std::string* stage) {
  std::int64_t now = net_.now_ms();
  bool cap_ok = false;
  if (cap && config_.trust_community_ca) {
    cap_ok = verify_capability(*cap, s.peer.name, config_.name, config_.trust, *keys_, now) &&
             cap->vo == vo;
    if (!cap_ok) {
      // A presented-but-bad token is a hard failure, not a fallthrough.
      if (stage) *stage = "capability";
      return make_error(Err::Denied, "capability rejected");
    }
  }

  Rights effective = s.rights;
  if (cap_ok)
    for (const auto& op : cap->operations.items()) effective.insert(op);
  if (cap_ok && cap->operations.is_all()) effective = Rights::all();

  if (!effective.contains(operation)) {
    if (stage) *stage = "rights";
    return make_error(Err::Denied, "right not delegated: " + operation);
  }

  AccessRequest areq;
  areq.principal = s.peer.name;
  areq.effective_rights = effective;
  areq.vo = vo;
  areq.operation = operation;
  areq.resource = config_.name;
  areq.context = context;
  Decision d = evaluate(areq, config_.policy);
  ValueRecord audit;
  audit["time_ms"] = now;
  audit["principal"] = areq.principal;
  audit["vo"] = vo;
  audit["operation"] = operation;
  audit["resource"] = config_.name;
  audit["allow"] = d.allow;
  if (d.matched_rule) audit["rule"] = static_cast<std::int64_t>(*d.matched_rule);
  decisions_.push_back(Value(std::move(audit)));
  if (!d.allow) {
    if (stage) *stage = "policy";
    return make_error(Err::Denied, "policy denied " + operation + " on " + config_.name);
  }

  auto account = config_.gridmap.map_to_local(s.peer.name);
  if (!account.ok()) {
    if (cap_ok) return config_.community_account;
    if (stage) *stage = "mapping";
    return account.error();
  }
  return *account;
}

Envelope ResourceHost::handle_info(const Envelope& req, const AuthServer::SessionInfo& s) {
  std::int64_t now = net_.now_ms();
  const std::string& me = config_.name;
  const std::string vo = req.payload.string_or("vo", "");

  if (req.message_type == "QUERY") {
    std::string stage;
    auto account = authorize(s, "info:query", vo, {}, std::nullopt, &stage);
    if (!account.ok()) return sign_reply(make_error_reply(req, account.error(), me, stage));

    if (const Value* file = req.payload.find("file"); file && file->is_string()) {
      if (!storage_)
        return sign_reply(
            make_error_reply(req, make_error(Err::NotFound, "no storage fabric"), me));
      auto size = storage_->file_size(file->as_string());
      if (!size.ok()) return sign_reply(make_error_reply(req, size.error(), me));
      ValueRecord out;
      out["file"] = Value(ValueRecord{{"path", *file}, {"size", Value(*size)}});
      return sign_reply(make_reply(req, "RESULT", Value(std::move(out)), me));
    }

    if (const Value* table = req.payload.find("table"); table && table->is_string()) {
      if (!catalog_)
        return sign_reply(
            make_error_reply(req, make_error(Err::UnknownTable, "no catalog fabric"), me));
      Result<std::vector<Value>> rows = make_error(Err::Malformed, "missing key or filter");
      if (const Value* key = req.payload.find("key"); key && key->is_string())
        rows = catalog_->query_key(table->as_string(), key->as_string());
      else if (const Value* f = req.payload.find("filter"); f && f->is_record())
        rows = catalog_->query_filter(table->as_string(), f->as_record());
      if (!rows.ok()) return sign_reply(make_error_reply(req, rows.error(), me));
      ValueRecord out;
      out["records"] = Value(ValueList(rows->begin(), rows->end()));
      return sign_reply(make_reply(req, "RESULT", Value(std::move(out)), me));
    }

    // Descriptor enquiry, optionally filtered.
    Value desc = descriptor();
    bool match = true;
    if (const Value* f = req.payload.find("filter"); f && f->is_record()) {
      for (const auto& [k, want] : f->as_record()) {
        if (k == "tag") {
          bool found = false;
          if (want.is_string() && desc.find("tags"))
            for (const Value& t : desc.find("tags")->as_list())
              if (t == want) found = true;
          match = match && found;
        } else {
          const Value* have = desc.find(k);
          match = match && have && *have == want;
        }
      }
    }
    ValueRecord out;
    ValueList descs;
    if (match) descs.push_back(std::move(desc));
    out["descriptors"] = Value(std::move(descs));
    return sign_reply(make_reply(req, "RESULT", Value(std::move(out)), me));
  }

  if (req.message_type == "UPDATE") {
    std::string stage;
    auto account = authorize(s, "catalog:update", vo, {}, std::nullopt, &stage);
    if (!account.ok()) return sign_reply(make_error_reply(req, account.error(), me, stage));
    if (!catalog_)
      return sign_reply(
          make_error_reply(req, make_error(Err::UnknownTable, "no catalog fabric"), me));
    const Value* table = req.payload.find("table");
    const Value* key = req.payload.find("key");
    const Value* record = req.payload.find("record");
    if (!table || !table->is_string() || !key || !key->is_string() || !record ||
        !record->is_record())
      return sign_reply(
          make_error_reply(req, make_error(Err::Malformed, "UPDATE needs table/key/record"), me));
    catalog_->update(table->as_string(), key->as_string(), *record);
    log_->append(now, me, "catalog_update", table->as_string() + "/" + key->as_string());
    return sign_reply(make_reply(req, "UPDATED", Value(ValueRecord{}), me));
  }

  return sign_reply(
      make_error_reply(req, make_error(Err::Malformed, "unknown info op " + req.message_type), me));
}

Envelope ResourceHost::handle_mgmt(const Envelope& req, const AuthServer::SessionInfo& s) {
  std::int64_t now = net_.now_ms();
  const std::string& me = config_.name;
  const std::string vo = req.payload.string_or("vo", "");

  if (req.message_type == "ALLOCATE") return do_allocate(req, s);

  if (req.message_type == "STATUS" || req.message_type == "CANCEL") {
    std::string job_id = req.payload.string_or("job_id", "");
    auto it = jobs_.find(job_id);
    if (it == jobs_.end())
      return sign_reply(make_error_reply(req, make_error(Err::UnknownJob, job_id), me));
    JobRecord& job = it->second;
    if (job.owner != s.peer.name && !s.rights.contains("compute:admin"))
      return sign_reply(make_error_reply(req, make_error(Err::NotOwner, job_id), me));
    if (req.message_type == "CANCEL" && !job.task_id.empty()) {
      auto st = compute_->cancel_task(now, job.task_id);
      if (!st.ok()) return sign_reply(make_error_reply(req, st.error(), me));
      log_->append(now, me, "cancel_task", job.request_id);
    }
    return sign_reply(make_reply(req, "RECORD", job_status_value(job, now), me));
  }

  if (req.message_type == "RESERVE") {
    if (!calendar_)
      return sign_reply(
          make_error_reply(req, make_error(Err::Malformed, "no slot calendar"), me));
    if (auto t = rsv_requests_.find(req.request_id); t != rsv_requests_.end()) {
      auto held = calendar_->holds().find(t->second);
      ValueRecord out;
      out["reservation_id"] = t->second;
      out["state"] = std::string(held != calendar_->holds().end() &&
                                         held->second.state == HoldState::Confirmed
                                     ? "confirmed"
                                     : "tentative");
      return sign_reply(make_reply(req, "TENTATIVE", Value(std::move(out)), me));
    }
    std::string stage;
    auto account = authorize(s, "reserve", vo, {}, std::nullopt, &stage);
    if (!account.ok()) return sign_reply(make_error_reply(req, account.error(), me, stage));
    auto r = calendar_->reserve(now, req.payload.int_or("start_ms", 0),
                                req.payload.int_or("end_ms", 0),
                                req.payload.int_or("amount", 1), s.peer.name);
    if (!r.ok()) return sign_reply(make_error_reply(req, r.error(), me));
    rsv_requests_[req.request_id] = r->reservation_id;
    log_->append(now, me, "reserve", req.request_id);
    ValueRecord out;
    out["reservation_id"] = r->reservation_id;
    out["state"] = std::string("tentative");
    return sign_reply(make_reply(req, "TENTATIVE", Value(std::move(out)), me));
  }

  if (req.message_type == "CONFIRM") {
    std::string rid = req.payload.string_or("reservation_id", "");
    auto held = calendar_ ? calendar_->holds().find(rid) : std::map<std::string, Reservation>::const_iterator{};
    if (calendar_ && held != calendar_->holds().end() && held->second.holder != s.peer.name)
      return sign_reply(make_error_reply(req, make_error(Err::NotOwner, rid), me));
    auto r = calendar_ ? calendar_->confirm(now, rid)
                       : Result<Reservation>(make_error(Err::UnknownReservation, rid));
    if (!r.ok()) return sign_reply(make_error_reply(req, r.error(), me));
    log_->append(now, me, "confirm", rid);
    ValueRecord out;
    out["reservation_id"] = rid;
    return sign_reply(make_reply(req, "CONFIRMED", Value(std::move(out)), me));
  }

  if (req.message_type == "RELEASE") {
    std::string rid = req.payload.string_or("reservation_id", "");
    if (calendar_) {
      auto held = calendar_->holds().find(rid);
      if (held != calendar_->holds().end() && held->second.holder != s.peer.name)
        return sign_reply(make_error_reply(req, make_error(Err::NotOwner, rid), me));
      if (calendar_->release(now, rid).ok()) log_->append(now, me, "release", rid);
    }
    // Releasing an unknown or already-released hold succeeds: abort
    // sweeps release every leg without tracking which ones took hold.
    ValueRecord out;
    out["reservation_id"] = rid;
    return sign_reply(make_reply(req, "RELEASED", Value(std::move(out)), me));
  }

  return sign_reply(
      make_error_reply(req, make_error(Err::Malformed, "unknown mgmt op " + req.message_type), me));
}

Envelope ResourceHost::do_allocate(const Envelope& req, const AuthServer::SessionInfo& s) {
  std::int64_t now = net_.now_ms();
  const std::string& me = config_.name;

  if (auto t = tombstones_.find(req.request_id); t != tombstones_.end()) {
    ValueRecord out;
    out["job_id"] = t->second;
    out["replayed"] = true;
    return sign_reply(make_reply(req, "ALLOCATED", Value(std::move(out)), me));
  }

  if (!compute_)
    return sign_reply(make_error_reply(req, make_error(Err::Malformed, "not a compute host"), me));
  const Value* jobv = req.payload.find("job");
  if (!jobv || !jobv->is_record())
    return sign_reply(make_error_reply(req, make_error(Err::Malformed, "missing job record"), me));
  const Value& job = *jobv;
  std::string vo = job.string_or("vo", "");
  std::string executable = job.string_or("executable", "");
  std::int64_t work_units = job.int_or("work_units", 1);
  std::string output = job.string_or("output", "");
  std::vector<std::string> inputs;
  if (const Value* in = job.find("inputs"); in && in->is_list())
    for (const Value& i : in->as_list())
      if (i.is_string()) inputs.push_back(i.as_string());

  std::optional<Capability> cap;
  if (const Value* cv = req.payload.find("capability")) {
    auto parsed = Capability::from_value(*cv);
    if (!parsed.ok())
      return sign_reply(make_error_reply(req, parsed.error(), me, "capability"));
    cap = *parsed;
  }

  std::map<std::string, Value> context;
  if (const Value* cons = job.find("constraints"); cons && cons->is_record())
    for (const auto& [k, v] : cons->as_record()) context[k] = v;
  bool certified = compute_->tags().count("certified") != 0;
  context["certified"] = Value(certified);

  std::string stage;
  auto account = authorize(s, "compute:submit", vo, context, cap, &stage);
  if (!account.ok()) return sign_reply(make_error_reply(req, account.error(), me, stage));

  if (compute_->queue_length(now) >= config_.queue_limit)
    return sign_reply(make_error_reply(
        req, make_error(Err::ResourceSaturated, "queue limit", config_.queue_limit), me));

  // Staging runs under the requester's delegated chain: this host pulls
  // from the source by asking it to push here.
  if (const Value* sf = req.payload.find("stage_from"); sf && sf->is_record()) {
    if (!storage_)
      return sign_reply(make_error_reply(
          req, make_error(Err::StagingFailed, "no local store"), me, "staging"));
    EndpointAddress source = EndpointAddress::from_value(*sf->find("endpoint"));
    if (const Value* paths = sf->find("paths"); paths && paths->is_list()) {
      for (const Value& p : paths->as_list()) {
        if (!p.is_string()) continue;
        ValueRecord xp;
        xp["source"] = Value(ValueRecord{{"path", p}});
        xp["dest"] = Value(ValueRecord{{"endpoint", addr_.to_value()}, {"path", p}});
        xp["vo"] = vo;
        auto pulled = client_->call_ok(source, s.chain, proto::kData, "XFER",
                                       Value(std::move(xp)), net_.new_request_id());
        if (!pulled.ok())
          return sign_reply(make_error_reply(
              req,
              make_error(Err::StagingFailed,
                         std::string(err_name(pulled.code())) + " staging " + p.as_string()),
              me, "staging"));
      }
    }
  }

  if (storage_ && !executable.empty() && !storage_->file_size(executable).ok())
    return sign_reply(make_error_reply(
        req, make_error(Err::StagingFailed, "executable not staged: " + executable), me,
        "staging"));

  std::string task_id = compute_->start_task(now, work_units, executable, inputs, output);
  log_->append(now, me, "start_task", req.request_id);

  JobRecord rec;
  rec.job_id = me + "-job" + std::to_string(++job_counter_);
  rec.request_id = req.request_id;
  rec.owner = s.peer.name;
  rec.local_account = *account;
  rec.vo = vo;
  rec.task_id = task_id;
  rec.work_units = work_units;
  rec.executable = executable;
  rec.output_path = output;
  rec.submitted_ms = now;
  tombstones_[req.request_id] = rec.job_id;
  jobs_[rec.job_id] = std::move(rec);

  ValueRecord out;
  out["job_id"] = tombstones_[req.request_id];
  out["replayed"] = false;
  return sign_reply(make_reply(req, "ALLOCATED", Value(std::move(out)), me));
}

Value ResourceHost::job_status_value(const JobRecord& j, std::int64_t now_ms) {
  settle(now_ms);
  Value rec = j.to_value();
  std::string state = "failed";
  if (!j.task_id.empty()) {
    auto st = compute_->task_status(now_ms, j.task_id);
    if (st.ok()) state = task_state_name(*st);
    auto task = compute_->task_record(now_ms, j.task_id);
    if (task.ok()) {
      rec.set("started_ms", task->started_ms);
      rec.set("finished_ms", task->finished_ms);
    }
  }
  rec.set("state", state);
  return rec;
}

Envelope ResourceHost::handle_data(const Envelope& req, const AuthServer::SessionInfo& s) {
  if (req.message_type == "XFER") return do_xfer(req, s);
  if (req.message_type == "CHUNK") return do_chunk(req, s);
  return sign_reply(make_error_reply(
      req, make_error(Err::Malformed, "unknown data op " + req.message_type), config_.name));
}

Envelope ResourceHost::do_xfer(const Envelope& req, const AuthServer::SessionInfo& s) {
  std::int64_t start = net_.now_ms();
  const std::string& me = config_.name;
  if (!storage_)
    return sign_reply(make_error_reply(req, make_error(Err::NotFound, "no storage fabric"), me));

  const Value* source = req.payload.find("source");
  const Value* dest = req.payload.find("dest");
  if (!source || !source->is_record() || !dest || !dest->is_record() || !dest->find("endpoint"))
    return sign_reply(
        make_error_reply(req, make_error(Err::Malformed, "XFER needs source and dest"), me));
  std::string vo = req.payload.string_or("vo", "");

  std::string stage;
  auto account = authorize(s, "storage:read", vo, {}, std::nullopt, &stage);
  if (!account.ok())
    return sign_reply(make_error_reply(
        req, make_error(Err::SourceDenied, account.error().detail), me, stage));

  std::string path = source->string_or("path", "");
  Result<std::string> content = make_error(Err::NotFound, path);
  if (source->has("offset") || source->has("length")) {
    std::int64_t offset = source->int_or("offset", 0);
    std::int64_t length = source->int_or("length", 0);
    content = storage_->read_range(path, offset, length);
  } else {
    content = storage_->get_file(path);
  }
  if (!content.ok()) return sign_reply(make_error_reply(req, content.error(), me));

  EndpointAddress dest_ep = EndpointAddress::from_value(*dest->find("endpoint"));
  std::string dest_path = dest->string_or("path", path);
  std::int64_t streams = std::clamp<std::int64_t>(req.payload.int_or("streams", 1), 1, 16);
  std::string transfer_id = me + "-x" + std::to_string(++transfer_counter_);
  std::int64_t total = static_cast<std::int64_t>(content->size());

  // streams=k partitions the range into k near-equal contiguous chunks,
  // remainder on the last one. Chunks are sent as independent messages
  // and the destination reassembles by offset.
  std::int64_t nchunks = total == 0 ? 1 : std::min(streams, total);
  std::int64_t base = total / nchunks;
  std::int64_t sent = 0;
  {
    for (std::int64_t i = 0; i < nchunks; i++) {
      std::int64_t off = i * base;
      std::int64_t len = i + 1 == nchunks ? total - off : base;
      if (len < 0) len = 0;
      ValueRecord cp;
      cp["transfer_id"] = transfer_id;
      cp["path"] = dest_path;
      cp["offset"] = off;
      cp["data"] = to_bytes(std::string_view(content->data() + off, static_cast<std::size_t>(len)));
      cp["total"] = total;
      cp["vo"] = vo;
      auto ok = client_->call_ok(dest_ep, s.chain, proto::kData, "CHUNK", Value(std::move(cp)),
                                 net_.new_request_id());
      if (!ok.ok()) {
        Err code = ok.code();
        if (code == Err::Denied || code == Err::DestDenied || code == Err::AuthFailed)
          return sign_reply(make_error_reply(
              req, make_error(Err::DestDenied, ok.error().detail, sent), me, "dest"));
        if (code == Err::NoSpace)
          return sign_reply(make_error_reply(req, ok.error(), me, "dest"));
        return sign_reply(make_error_reply(
            req,
            make_error(Err::PartialFailure,
                       std::string(err_name(code)) + " after " + std::to_string(sent) + " chunks",
                       sent),
            me));
      }
      sent++;
    }
  }

  ValueRecord out;
  out["bytes_moved"] = total;
  out["chunks"] = sent;
  out["duration_ms"] = net_.now_ms() - start;
  log_->append(net_.now_ms(), me, "xfer", req.request_id);
  return sign_reply(make_reply(req, "DONE", Value(std::move(out)), me));
}

Envelope ResourceHost::do_chunk(const Envelope& req, const AuthServer::SessionInfo& s) {
  std::int64_t now = net_.now_ms();
  const std::string& me = config_.name;
  if (!storage_)
    return sign_reply(make_error_reply(req, make_error(Err::NoSpace, "no storage fabric"), me));

  std::string transfer_id = req.payload.string_or("transfer_id", "");
  std::string path = req.payload.string_or("path", "");
  std::int64_t offset = req.payload.int_or("offset", -1);
  std::int64_t total = req.payload.int_or("total", -1);
  const Value* data = req.payload.find("data");
  if (transfer_id.empty() || offset < 0 || total < 0 || !data || !data->is_bytes())
    return sign_reply(make_error_reply(req, make_error(Err::Malformed, "bad CHUNK"), me));

  if (completed_transfers_.count(transfer_id)) {
    ValueRecord out;
    out["complete"] = true;
    return sign_reply(make_reply(req, "CHUNK-OK", Value(std::move(out)), me));
  }

  auto [it, fresh] = transfers_.try_emplace(transfer_id);
  PendingTransfer& t = it->second;
  if (fresh) {
    t.dest_path = path;
    t.owner = s.peer.name;
    t.vo = req.payload.string_or("vo", "");
    t.total = total;
  }
  if (!t.checked) {
    std::string stage;
    auto account = authorize(s, "storage:write", t.vo, {}, std::nullopt, &stage);
    if (!account.ok()) {
      transfers_.erase(transfer_id);
      return sign_reply(make_error_reply(
          req, make_error(Err::DestDenied, account.error().detail), me, stage));
    }
    std::int64_t existing = 0;
    if (auto sz = storage_->file_size(t.dest_path); sz.ok()) existing = *sz;
    if (t.total - existing > storage_->free_bytes()) {
      transfers_.erase(transfer_id);
      return sign_reply(make_error_reply(req, make_error(Err::NoSpace, t.dest_path), me));
    }
    t.checked = true;
  }

  std::string piece = bytes_to_string(data->as_bytes());
  if (!t.pieces.count(offset)) {  // duplicate delivery of a chunk is a no-op
    t.received += static_cast<std::int64_t>(piece.size());
    t.pieces[offset] = std::move(piece);
  }

  bool complete = t.received >= t.total;
  if (complete) {
    std::string assembled;
    assembled.reserve(static_cast<std::size_t>(t.total));
    bool contiguous = true;
    for (const auto& [off, bytes] : t.pieces) {
      if (off != static_cast<std::int64_t>(assembled.size())) contiguous = false;
      assembled += bytes;
    }
    if (!contiguous || static_cast<std::int64_t>(assembled.size()) != t.total) {
      transfers_.erase(transfer_id);
      return sign_reply(
          make_error_reply(req, make_error(Err::SizeMismatch, transfer_id), me));
    }
    auto put = storage_->put_file(t.dest_path, assembled);  // atomic commit
    std::string dest_path = t.dest_path;
    transfers_.erase(transfer_id);
    if (!put.ok()) return sign_reply(make_error_reply(req, put.error(), me));
    completed_transfers_.insert(transfer_id);
    log_->append(now, me, "put_file", dest_path);
  }

  ValueRecord out;
  out["complete"] = complete;
  return sign_reply(make_reply(req, "CHUNK-OK", Value(std::move(out)), me));
}

}  // namespace grid
