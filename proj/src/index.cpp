#include "grid/index.hpp"

namespace grid {

IndexService::IndexService(Transport& net, std::shared_ptr<KeyStore> keys, Chain service_chain,
                           IndexConfig config)
    : net_(net),
      keys_(keys),
      chain_(std::move(service_chain)),
      config_(std::move(config)),
      addr_{config_.org, "index", config_.name},
      auth_(keys, config_.trust, chain_) {}

void IndexService::start() {
  net_.bind(addr_, [this](const Envelope& req) { return handle(req); });
  alive_ = true;
}

void IndexService::stop() {
  if (!alive_) return;
  net_.unbind(addr_);
  alive_ = false;
}

void IndexService::define_view(const std::string& name, ValueRecord filter) {
  views_[name] = std::move(filter);
}

void IndexService::sweep(std::int64_t now_ms) {
  for (auto it = regs_.begin(); it != regs_.end();) {
    if (it->second.deadline_ms < now_ms) {
      ValueRecord ev;
      ev["time_ms"] = now_ms;
      ev["kind"] = std::string("DOWN");
      ev["resource"] = it->second.descriptor.string_or("name", it->first);
      events_.push_back(Value(std::move(ev)));
      it = regs_.erase(it);
    } else {
      ++it;
    }
  }
}

bool IndexService::matches(const Value& descriptor, const ValueRecord& filter) {
  for (const auto& [k, want] : filter) {
    if (k == "tag" || k == "type") {
      // membership in the tags / services list
      const Value* list = descriptor.find(k == "tag" ? "tags" : "services");
      bool found = false;
      if (list && list->is_list())
        for (const Value& item : list->as_list())
          if (item == want) found = true;
      if (!found) return false;
    } else {
      const Value* have = descriptor.find(k);
      if (!have || !(*have == want)) return false;
    }
  }
  return true;
}

std::vector<Value> IndexService::snapshot(std::int64_t now_ms, const ValueRecord& filter) const {
  std::vector<Value> out;
  for (const auto& [key, reg] : regs_) {
    if (reg.deadline_ms < now_ms) continue;  // dead, sweep pending
    if (!matches(reg.descriptor, filter)) continue;
    Value d = reg.descriptor;
    d.set("staleness_ms", now_ms - reg.last_refresh_ms);
    d.set("generation", reg.generation);
    out.push_back(std::move(d));
  }
  return out;
}

Value IndexService::snapshot_value() const {
  ValueList entries;
  for (const auto& [key, reg] : regs_) {
    ValueRecord e;
    e["descriptor"] = reg.descriptor;
    e["registrant"] = reg.registrant;
    e["ttl_ms"] = reg.ttl_ms;
    e["generation"] = reg.generation;
    entries.push_back(Value(std::move(e)));
  }
  return Value(ValueRecord{{"registrations", Value(std::move(entries))}});
}

Status IndexService::load_snapshot(const Value& v, std::int64_t now_ms) {
  const Value* entries = v.find("registrations");
  if (!entries || !entries->is_list())
    return make_error(Err::ValidationError, "snapshot has no registrations list");
  for (const Value& e : entries->as_list()) {
    const Value* desc = e.find("descriptor");
    if (!desc || !desc->is_record()) continue;
    Registration reg;
    reg.descriptor = *desc;
    reg.endpoint_key = EndpointAddress::from_value(*desc->find("endpoint")).key();
    reg.registrant = e.string_or("registrant", "");
    reg.ttl_ms = e.int_or("ttl_ms", config_.min_ttl_ms);
    reg.generation = e.int_or("generation", 1);
    reg.last_refresh_ms = now_ms;
    reg.deadline_ms = now_ms + reg.ttl_ms;  // deadlines recomputed on load
    regs_[reg.endpoint_key] = std::move(reg);
  }
  return ok_status();
}

Envelope IndexService::handle(const Envelope& req) {
  std::int64_t now = net_.now_ms();
  const std::string& me = auth_.identity_name();
  if (auth_.is_auth_message(req)) return auth_.handle(req, now);
  auto session = auth_.verify_request(req, now);
  if (!session.ok()) return make_error_reply(req, session.error(), me, "auth");

  if (req.protocol == proto::kGrrp) {
    if (req.message_type == "REGISTER" || req.message_type == "REFRESH") {
      if (auto hit = ack_cache_.find(req.request_id); hit != ack_cache_.end())
        return make_reply(req, "ACK",
                          Value(ValueRecord{{"generation", Value(hit->second)}}), me);
      const Value* desc = req.payload.find("descriptor");
      if (!desc || !desc->is_record() || !desc->find("endpoint"))
        return make_error_reply(req, make_error(Err::Malformed, "missing descriptor"), me);
      if (session->peer.kind != IdentityKind::Service)
        return make_error_reply(
            req, make_error(Err::AuthFailed, "registrant is not a service identity"), me);
      std::int64_t ttl = req.payload.int_or("ttl_ms", 0);
      if (ttl < config_.min_ttl_ms || ttl > config_.max_ttl_ms)
        return make_error_reply(req, make_error(Err::TtlOutOfRange, "", ttl), me);

      std::string key = EndpointAddress::from_value(*desc->find("endpoint")).key();
      Registration& reg = regs_[key];
      reg.descriptor = *desc;
      reg.endpoint_key = key;
      reg.registrant = session->peer.name;
      reg.ttl_ms = ttl;
      reg.deadline_ms = now + ttl;
      reg.last_refresh_ms = now;
      reg.generation++;
      std::int64_t queue = desc->int_or("queue_length", 0);
      reg.overload_streak = queue > config_.overload_queue_threshold
                                ? reg.overload_streak + 1
                                : 0;
      if (reg.overload_streak == 2) {
        ValueRecord ev;
        ev["time_ms"] = now;
        ev["kind"] = std::string("OVERLOAD");
        ev["resource"] = desc->string_or("name", key);
        events_.push_back(Value(std::move(ev)));
      }
      ack_cache_[req.request_id] = reg.generation;
      return make_reply(req, "ACK",
                        Value(ValueRecord{{"generation", Value(reg.generation)}}), me);
    }
    if (req.message_type == "UNREGISTER") {
      const Value* ep = req.payload.find("endpoint");
      if (ep && ep->is_record()) regs_.erase(EndpointAddress::from_value(*ep).key());
      return make_reply(req, "ACK", Value(ValueRecord{}), me);
    }
    return make_error_reply(req, make_error(Err::Malformed, "unknown grrp op"), me);
  }

  if (req.protocol == proto::kInfo && req.message_type == "QUERY") {
    if (!session->rights.contains("info:query"))
      return make_error_reply(req, make_error(Err::Denied, "info:query not delegated"), me,
                              "rights");
    ValueRecord filter;
    if (const Value* view = req.payload.find("view"); view && view->is_string()) {
      auto it = views_.find(view->as_string());
      if (it == views_.end())
        return make_error_reply(req, make_error(Err::UnknownView, view->as_string()), me);
      filter = it->second;
    } else if (const Value* f = req.payload.find("filter"); f && f->is_record()) {
      filter = f->as_record();
    }
    std::vector<Value> live = snapshot(now, filter);
    ValueRecord out;
    out["descriptors"] = Value(ValueList(live.begin(), live.end()));
    return make_reply(req, "RESULT", Value(std::move(out)), me);
  }

  return make_error_reply(req, make_error(Err::Malformed, "unknown index request"), me);
}

}  // namespace grid
