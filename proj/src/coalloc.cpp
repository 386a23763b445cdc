#include "grid/coalloc.hpp"

namespace grid {

Value PlanLeg::to_value() const {
  ValueRecord r;
  r["host"] = host.to_value();
  r["start_ms"] = start_ms;
  r["end_ms"] = end_ms;
  r["amount"] = amount;
  return Value(std::move(r));
}

PlanLeg PlanLeg::from_value(const Value& v) {
  PlanLeg l;
  if (const Value* h = v.find("host")) l.host = EndpointAddress::from_value(*h);
  l.start_ms = v.int_or("start_ms", 0);
  l.end_ms = v.int_or("end_ms", 0);
  l.amount = v.int_or("amount", 1);
  return l;
}

Value CoAllocationPlan::to_value() const {
  ValueRecord r;
  r["plan_id"] = plan_id;
  ValueList lv;
  for (const PlanLeg& l : legs) lv.push_back(l.to_value());
  r["legs"] = Value(std::move(lv));
  r["state"] = state;
  ValueList ids;
  for (const auto& id : reservation_ids) ids.push_back(Value(id));
  r["reservation_ids"] = Value(std::move(ids));
  return Value(std::move(r));
}

Result<CoAllocationPlan> coallocate(GridClient& client, const std::vector<PlanLeg>& legs,
                                    const std::string& vo, std::string plan_id) {
  if (plan_id.empty()) plan_id = "plan-" + client.raw().new_request_id();
  CoAllocationPlan plan;
  plan.plan_id = plan_id;
  plan.legs = legs;

  auto release_all = [&](std::size_t upto) {
    // Best effort; an unreachable host's tentative hold expires on its
    // own, which is what keeps abort safe.
    for (std::size_t i = 0; i < upto; i++)
      (void)client.release(legs[i].host, plan.reservation_ids[i]);
  };

  // Phase 1: tentative holds in plan order.
  for (std::size_t i = 0; i < legs.size(); i++) {
    const PlanLeg& leg = legs[i];
    auto r = client.reserve(leg.host, leg.start_ms, leg.end_ms, leg.amount, vo,
                            plan_id + "-leg" + std::to_string(i));
    if (!r.ok()) {
      release_all(i);
      const Error& e = r.error();
      if (e.code == Err::Conflict)
        return make_error(Err::LegConflict, "earliest fit " + std::to_string(e.aux),
                          static_cast<std::int64_t>(i));
      if (e.code == Err::Unreachable || e.code == Err::Timeout)
        return make_error(Err::LegUnreachable, leg.host.key(), static_cast<std::int64_t>(i));
      return make_error(Err::Aborted, std::string(err_name(e.code)) + ": " + e.detail,
                        static_cast<std::int64_t>(i));
    }
    plan.reservation_ids.push_back(*r);
  }

  // Phase 2: confirm everywhere; any failure aborts the whole plan.
  for (std::size_t i = 0; i < legs.size(); i++) {
    auto c = client.confirm(legs[i].host, plan.reservation_ids[i]);
    if (!c.ok()) {
      release_all(legs.size());
      Err code = c.code() == Err::Unreachable || c.code() == Err::Timeout ? Err::LegUnreachable
                                                                          : Err::Aborted;
      return make_error(code, "confirm failed: " + c.error().detail,
                        static_cast<std::int64_t>(i));
    }
  }

  plan.state = "confirmed";
  return plan;
}

CoReservationService::CoReservationService(Transport& net, std::shared_ptr<KeyStore> keys,
                                           Chain service_chain, CoReservationConfig config)
    : net_(net),
      keys_(keys),
      chain_(std::move(service_chain)),
      config_(std::move(config)),
      addr_{config_.org, "coalloc", config_.name},
      auth_(keys, config_.trust, chain_) {}

void CoReservationService::start() {
  client_.emplace(net_, addr_, keys_, config_.trust, chain_);
  net_.bind(addr_, [this](const Envelope& req) { return handle(req); });
  alive_ = true;
}

void CoReservationService::stop() {
  if (!alive_) return;
  net_.unbind(addr_);
  alive_ = false;
}

Envelope CoReservationService::handle(const Envelope& req) {
  std::int64_t now = net_.now_ms();
  const std::string& me = auth_.identity_name();
  if (auth_.is_auth_message(req)) return auth_.handle(req, now);
  auto session = auth_.verify_request(req, now);
  if (!session.ok()) return make_error_reply(req, session.error(), me, "auth");

  if (req.protocol != proto::kCoalloc || req.message_type != "RESERVE")
    return make_error_reply(req, make_error(Err::Malformed, "expected coalloc RESERVE"), me);

  // A retried request must not run the plan twice.
  if (auto hit = done_.find(req.request_id); hit != done_.end()) {
    Envelope replay = hit->second;
    replay.request_id = req.request_id;
    return replay;
  }

  std::string vo = req.payload.string_or("vo", "");
  std::vector<PlanLeg> legs;
  if (const Value* lv = req.payload.find("legs"); lv && lv->is_list())
    for (const Value& l : lv->as_list()) legs.push_back(PlanLeg::from_value(l));
  if (legs.empty())
    return make_error_reply(req, make_error(Err::Malformed, "no legs"), me);

  auto log_entry = [&](const std::string& outcome, std::int64_t attempts) {
    ValueRecord e;
    e["time_ms"] = net_.now_ms();
    e["requester"] = session->peer.name;
    e["vo"] = vo;
    e["legs"] = static_cast<std::int64_t>(legs.size());
    e["outcome"] = outcome;
    e["attempts"] = attempts;
    log_.push_back(Value(std::move(e)));
  };

  // Pre-flight policy: deny before any reserve message leaves.
  AccessRequest areq;
  areq.principal = session->peer.name;
  areq.effective_rights = session->rights;
  areq.vo = vo;
  areq.operation = "reserve";
  areq.resource = config_.name;
  if (!evaluate(areq, config_.policy).allow) {
    log_entry("denied", 0);
    return make_error_reply(req, make_error(Err::Denied, "co-reservation policy"), me, "policy");
  }

  // The plan runs under the requester's delegated chain.
  client_->set_chain(session->chain);
  std::string plan_id = me + "-plan" + std::to_string(++plan_counter_);
  auto first = coallocate(*client_, legs, vo, plan_id);
  if (first.ok()) {
    log_entry("confirmed", 1);
    return done_[req.request_id] = make_reply(req, "CONFIRMED", first->to_value(), me);
  }

  // One automatic retry. Re-query the index; if the failed leg's host
  // can be substituted with a fresh compute candidate, remap it.
  std::vector<PlanLeg> retry_legs = legs;
  std::int64_t failed = first.error().aux;
  Requirements want;
  want.type = "compute";
  auto candidates = discover_and_rank(*client_, config_.index, want);
  if (candidates.ok() && failed >= 0 && failed < static_cast<std::int64_t>(retry_legs.size())) {
    for (const Value& d : *candidates) {
      EndpointAddress ep = EndpointAddress::from_value(*d.find("endpoint"));
      bool in_use = false;
      for (const PlanLeg& l : retry_legs)
        if (l.host == ep) in_use = true;
      if (!in_use) {
        retry_legs[static_cast<std::size_t>(failed)].host = ep;
        break;
      }
    }
  }
  auto second = coallocate(*client_, retry_legs, vo, plan_id + "-r");
  if (second.ok()) {
    log_entry("confirmed", 2);
    return done_[req.request_id] = make_reply(req, "CONFIRMED", second->to_value(), me);
  }
  log_entry("aborted", 2);
  return done_[req.request_id] = make_error_reply(
             req, make_error(Err::AbortedTwice, second.error().detail, second.error().aux), me);
}

Result<CoAllocationPlan> co_reserve_end_to_end(AuthClient& client, const EndpointAddress& service,
                                               const Chain& chain, const std::string& vo,
                                               const std::vector<PlanLeg>& legs) {
  ValueRecord p;
  p["vo"] = vo;
  ValueList lv;
  for (const PlanLeg& l : legs) lv.push_back(l.to_value());
  p["legs"] = Value(std::move(lv));
  auto reply = client.call_ok(service, chain, proto::kCoalloc, "RESERVE", Value(std::move(p)),
                              client.new_request_id(), 10000);
  if (!reply.ok()) return reply.error();
  CoAllocationPlan plan;
  plan.plan_id = reply->payload.string_or("plan_id", "");
  plan.state = reply->payload.string_or("state", "confirmed");
  if (const Value* lv2 = reply->payload.find("legs"); lv2 && lv2->is_list())
    for (const Value& l : lv2->as_list()) plan.legs.push_back(PlanLeg::from_value(l));
  if (const Value* ids = reply->payload.find("reservation_ids"); ids && ids->is_list())
    for (const Value& id : ids->as_list())
      if (id.is_string()) plan.reservation_ids.push_back(id.as_string());
  return plan;
}

}  // namespace grid
