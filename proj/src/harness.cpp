#include "grid/harness.hpp"

#include <algorithm>

namespace grid {

namespace {

constexpr std::int64_t kWeekMs = 7LL * 24 * 3600 * 1000;

Value string_list(const std::vector<std::string>& items) {
  ValueList l;
  for (const auto& s : items) l.push_back(Value(s));
  return Value(std::move(l));
}

Value string_set(const std::set<std::string>& items) {
  ValueList l;
  for (const auto& s : items) l.push_back(Value(s));
  return Value(std::move(l));
}

std::vector<std::string> strings_of(const Value* v) {
  std::vector<std::string> out;
  if (v && v->is_list())
    for (const Value& item : v->as_list())
      if (item.is_string()) out.push_back(item.as_string());
  return out;
}

Value gridmap_to_value(const GridMap& gm) {
  ValueList l;
  for (const auto& [id, account] : gm.entries)
    l.push_back(Value(ValueRecord{{"identity", Value(id)}, {"account", Value(account)}}));
  return Value(std::move(l));
}

GridMap gridmap_from_value(const Value* v) {
  GridMap gm;
  if (v && v->is_list())
    for (const Value& e : v->as_list())
      gm.entries[e.string_or("identity", "")] = e.string_or("account", "");
  return gm;
}

std::vector<PolicyRule> rules_of(const Value* v) {
  if (!v) return {};
  auto r = rules_from_value(*v);
  return r.ok() ? *r : std::vector<PolicyRule>{};
}

Value requirements_to_value(const Requirements& r) {
  ValueRecord out;
  out["min_slots"] = r.min_slots;
  out["tags"] = string_set(r.tags);
  out["max_queue"] = r.max_queue;
  out["type"] = r.type;
  return Value(std::move(out));
}

Requirements requirements_from_value(const Value* v) {
  Requirements r;
  if (!v) return r;
  r.min_slots = v->int_or("min_slots", 0);
  for (const auto& t : strings_of(v->find("tags"))) r.tags.insert(t);
  r.max_queue = v->int_or("max_queue", 1LL << 40);
  r.type = v->string_or("type", "");
  return r;
}

std::vector<PolicyRule> allow_all_policy() {
  return {PolicyRule{"*", "*", "*", "*", true, {}}};
}

const char* kAdminIdentity = "/harness/user=admin";

bool denial_error(Err e) { return e == Err::Denied || e == Err::NoMapping; }

}  // namespace

// ---- scenario declaration serialization ----

Value HostSpec::to_value() const {
  ValueRecord r;
  r["name"] = name;
  r["compute_slots"] = std::int64_t{compute_slots};
  r["slot_speed"] = slot_speed;
  r["storage_bytes"] = storage_bytes;
  r["catalog"] = catalog;
  r["calendar_capacity"] = calendar_capacity;
  r["tags"] = string_set(tags);
  ValueList fl;
  for (const auto& [path, content] : files)
    fl.push_back(Value(ValueRecord{{"path", Value(path)}, {"content", Value(content)}}));
  r["files"] = Value(std::move(fl));
  if (!policy.empty()) r["policy"] = rules_to_value(policy);
  return Value(std::move(r));
}

HostSpec HostSpec::from_value(const Value& v) {
  HostSpec h;
  h.name = v.string_or("name", "");
  h.compute_slots = static_cast<int>(v.int_or("compute_slots", 0));
  h.slot_speed = v.int_or("slot_speed", 1);
  h.storage_bytes = v.int_or("storage_bytes", 0);
  h.catalog = v.bool_or("catalog", false);
  h.calendar_capacity = v.int_or("calendar_capacity", 0);
  for (const auto& t : strings_of(v.find("tags"))) h.tags.insert(t);
  if (const Value* fl = v.find("files"); fl && fl->is_list())
    for (const Value& f : fl->as_list())
      h.files[f.string_or("path", "")] = f.string_or("content", "");
  h.policy = rules_of(v.find("policy"));
  return h;
}

Value OrgSpec::to_value() const {
  ValueRecord r;
  r["name"] = name;
  ValueList hl;
  for (const HostSpec& h : hosts) hl.push_back(h.to_value());
  r["hosts"] = Value(std::move(hl));
  r["gridmap"] = gridmap_to_value(gridmap);
  r["policy"] = rules_to_value(policy);
  return Value(std::move(r));
}

OrgSpec OrgSpec::from_value(const Value& v) {
  OrgSpec o;
  o.name = v.string_or("name", "");
  if (const Value* hl = v.find("hosts"); hl && hl->is_list())
    for (const Value& h : hl->as_list()) o.hosts.push_back(HostSpec::from_value(h));
  o.gridmap = gridmap_from_value(v.find("gridmap"));
  o.policy = rules_of(v.find("policy"));
  return o;
}

Value UserSpec::to_value() const {
  return Value(ValueRecord{{"name", Value(name)}, {"rights", rights.to_value()}});
}

UserSpec UserSpec::from_value(const Value& v) {
  UserSpec u;
  u.name = v.string_or("name", "");
  if (const Value* r = v.find("rights")) u.rights = Rights::from_value(*r);
  return u;
}

Value VoSpec::to_value() const {
  ValueRecord r;
  r["name"] = name;
  r["roster"] = string_set(roster);
  r["community_rights"] = community_rights.to_value();
  r["run_ca"] = run_ca;
  return Value(std::move(r));
}

VoSpec VoSpec::from_value(const Value& v) {
  VoSpec s;
  s.name = v.string_or("name", "");
  for (const auto& m : strings_of(v.find("roster"))) s.roster.insert(m);
  if (const Value* r = v.find("community_rights")) s.community_rights = Rights::from_value(*r);
  s.run_ca = v.bool_or("run_ca", false);
  return s;
}

Value ReplicaSpec::to_value() const {
  ValueRecord r;
  r["logical"] = logical;
  r["size"] = size;
  ValueList cl;
  for (const ReplicaCopy& c : copies) cl.push_back(c.to_value());
  r["copies"] = Value(std::move(cl));
  return Value(std::move(r));
}

ReplicaSpec ReplicaSpec::from_value(const Value& v) {
  ReplicaSpec r;
  r.logical = v.string_or("logical", "");
  r.size = v.int_or("size", 0);
  if (const Value* cl = v.find("copies"); cl && cl->is_list())
    for (const Value& c : cl->as_list()) r.copies.push_back(ReplicaCopy::from_value(c));
  return r;
}

Value WorkloadSpec::to_value() const {
  ValueRecord r;
  r["kind"] = kind;
  r["name"] = name;
  r["tasks"] = tasks;
  r["work_units"] = work_units;
  r["work_units_spread"] = work_units_spread;
  r["executable"] = executable;
  r["stage_b_executable"] = stage_b_executable;
  r["inputs"] = string_list(inputs);
  r["owner"] = owner;
  r["vo"] = vo;
  r["requirements"] = requirements_to_value(requirements);
  r["streams"] = streams;
  r["deadline_ms"] = deadline_ms;
  r["poll_ms"] = poll_ms;
  return Value(std::move(r));
}

WorkloadSpec WorkloadSpec::from_value(const Value& v) {
  WorkloadSpec w;
  w.kind = v.string_or("kind", "");
  w.name = v.string_or("name", "");
  w.tasks = v.int_or("tasks", 1);
  w.work_units = v.int_or("work_units", 1);
  w.work_units_spread = v.int_or("work_units_spread", 0);
  w.executable = v.string_or("executable", "");
  w.stage_b_executable = v.string_or("stage_b_executable", "");
  w.inputs = strings_of(v.find("inputs"));
  w.owner = v.string_or("owner", "");
  w.vo = v.string_or("vo", "");
  w.requirements = requirements_from_value(v.find("requirements"));
  w.streams = v.int_or("streams", 1);
  w.deadline_ms = v.int_or("deadline_ms", 120000);
  w.poll_ms = v.int_or("poll_ms", 1000);
  return w;
}

Value FaultEvent::to_value() const {
  ValueRecord r;
  r["time_ms"] = time_ms;
  r["kind"] = kind;
  r["target"] = target;
  r["target2"] = target2;
  r["after_done"] = after_done;
  return Value(std::move(r));
}

FaultEvent FaultEvent::from_value(const Value& v) {
  FaultEvent e;
  e.time_ms = v.int_or("time_ms", -1);
  e.kind = v.string_or("kind", "");
  e.target = v.string_or("target", "");
  e.target2 = v.string_or("target2", "");
  e.after_done = v.int_or("after_done", -1);
  return e;
}

Value FaultSchedule::to_value() const {
  ValueList l;
  for (const FaultEvent& e : events) l.push_back(e.to_value());
  return Value(ValueRecord{{"events", Value(std::move(l))}});
}

FaultSchedule FaultSchedule::from_value(const Value& v) {
  FaultSchedule s;
  if (const Value* l = v.find("events"); l && l->is_list())
    for (const Value& e : l->as_list()) s.events.push_back(FaultEvent::from_value(e));
  return s;
}

Value Scenario::to_value() const {
  ValueRecord r;
  r["name"] = name;
  ValueList ol;
  for (const OrgSpec& o : organizations) ol.push_back(o.to_value());
  r["organizations"] = Value(std::move(ol));
  ValueList ul;
  for (const UserSpec& u : users) ul.push_back(u.to_value());
  r["users"] = Value(std::move(ul));
  ValueList vl;
  for (const VoSpec& v : vos) vl.push_back(v.to_value());
  r["vos"] = Value(std::move(vl));
  ValueList rl;
  for (const ReplicaSpec& rep : replicas) rl.push_back(rep.to_value());
  r["replicas"] = Value(std::move(rl));
  ValueList wl;
  for (const WorkloadSpec& w : workloads) wl.push_back(w.to_value());
  r["workloads"] = Value(std::move(wl));
  ValueRecord n;
  n["seed"] = static_cast<std::int64_t>(net.seed);
  n["base_latency_ms"] = net.base_latency_ms;
  n["jitter_ms"] = net.jitter_ms;
  n["loss_ppm"] = static_cast<std::int64_t>(net.loss_probability * 1000000.0);
  r["net"] = Value(std::move(n));
  r["faults"] = faults.to_value();
  if (!coalloc_policy.empty()) r["coalloc_policy"] = rules_to_value(coalloc_policy);
  r["index_ttl_ms"] = index_ttl_ms;
  r["auto_refresh"] = auto_refresh;
  r["deadline_ms"] = deadline_ms;
  return Value(std::move(r));
}

Result<Scenario> Scenario::from_value(const Value& v) {
  if (!v.is_record()) return make_error(Err::ValidationError, "scenario: not a record");
  Scenario s;
  s.name = v.string_or("name", "");
  if (const Value* ol = v.find("organizations"); ol && ol->is_list())
    for (const Value& o : ol->as_list()) s.organizations.push_back(OrgSpec::from_value(o));
  if (const Value* ul = v.find("users"); ul && ul->is_list())
    for (const Value& u : ul->as_list()) s.users.push_back(UserSpec::from_value(u));
  if (const Value* vl = v.find("vos"); vl && vl->is_list())
    for (const Value& x : vl->as_list()) s.vos.push_back(VoSpec::from_value(x));
  if (const Value* rl = v.find("replicas"); rl && rl->is_list())
    for (const Value& r : rl->as_list()) s.replicas.push_back(ReplicaSpec::from_value(r));
  if (const Value* wl = v.find("workloads"); wl && wl->is_list())
    for (const Value& w : wl->as_list()) s.workloads.push_back(WorkloadSpec::from_value(w));
  if (const Value* n = v.find("net")) {
    s.net.seed = static_cast<std::uint64_t>(n->int_or("seed", 1));
    s.net.base_latency_ms = n->int_or("base_latency_ms", 5);
    s.net.jitter_ms = n->int_or("jitter_ms", 0);
    s.net.loss_probability = static_cast<double>(n->int_or("loss_ppm", 0)) / 1000000.0;
  }
  if (const Value* f = v.find("faults")) s.faults = FaultSchedule::from_value(*f);
  s.coalloc_policy = rules_of(v.find("coalloc_policy"));
  s.index_ttl_ms = v.int_or("index_ttl_ms", 30000);
  s.auto_refresh = v.bool_or("auto_refresh", true);
  s.deadline_ms = v.int_or("deadline_ms", 600000);
  return s;
}

// ---- validation ----

Status validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& path, const std::string& why) -> Status {
    return make_error(Err::ValidationError, path + ": " + why);
  };

  if (s.organizations.empty()) return fail("organizations", "at least one required");

  std::set<std::string> orgs, host_names, user_names, vo_names, logicals;
  for (std::size_t i = 0; i < s.organizations.size(); i++) {
    const OrgSpec& o = s.organizations[i];
    std::string p = "organizations[" + std::to_string(i) + "]";
    if (o.name.empty()) return fail(p + ".name", "empty");
    if (!orgs.insert(o.name).second) return fail(p + ".name", "duplicate " + o.name);
    for (std::size_t j = 0; j < o.hosts.size(); j++) {
      const HostSpec& h = o.hosts[j];
      std::string hp = p + ".hosts[" + std::to_string(j) + "]";
      if (h.name.empty()) return fail(hp + ".name", "empty");
      if (!host_names.insert(h.name).second) return fail(hp + ".name", "duplicate " + h.name);
      if (h.compute_slots == 0 && h.storage_bytes == 0 && !h.catalog)
        return fail(hp, "host provides no fabric");
    }
  }

  for (std::size_t i = 0; i < s.users.size(); i++) {
    std::string p = "users[" + std::to_string(i) + "]";
    if (s.users[i].name.empty()) return fail(p + ".name", "empty");
    if (!user_names.insert(s.users[i].name).second)
      return fail(p + ".name", "duplicate " + s.users[i].name);
  }

  for (std::size_t i = 0; i < s.vos.size(); i++) {
    const VoSpec& v = s.vos[i];
    std::string p = "vos[" + std::to_string(i) + "]";
    if (v.name.empty()) return fail(p + ".name", "empty");
    if (!vo_names.insert(v.name).second) return fail(p + ".name", "duplicate " + v.name);
    for (const auto& m : v.roster)
      if (!user_names.count(m)) return fail(p + ".roster", "undeclared identity " + m);
  }

  for (std::size_t i = 0; i < s.replicas.size(); i++) {
    const ReplicaSpec& r = s.replicas[i];
    std::string p = "replicas[" + std::to_string(i) + "]";
    if (r.logical.empty()) return fail(p + ".logical", "empty");
    if (!logicals.insert(r.logical).second) return fail(p + ".logical", "duplicate " + r.logical);
    if (r.size <= 0) return fail(p + ".size", "must be positive");
    if (r.copies.empty()) return fail(p + ".copies", "at least one copy required");
    for (std::size_t j = 0; j < r.copies.size(); j++) {
      std::string cp = p + ".copies[" + std::to_string(j) + "]";
      const std::string& hn = r.copies[j].endpoint.name;
      if (!host_names.count(hn)) return fail(cp, "unknown host " + hn);
      bool preloaded = false;
      for (const OrgSpec& o : s.organizations)
        for (const HostSpec& h : o.hosts)
          if (h.name == hn && h.files.count(r.copies[j].path)) preloaded = true;
      if (!preloaded) return fail(cp + ".path", "file not preloaded on " + hn);
    }
  }

  auto check_logical = [&](const std::string& p, const std::string& name) -> Status {
    if (name.empty()) return fail(p, "empty");
    // A leading slash means a literal path already on the hosts.
    if (name[0] != '/' && !logicals.count(name)) return fail(p, "undeclared replica " + name);
    return ok_status();
  };

  for (std::size_t i = 0; i < s.workloads.size(); i++) {
    const WorkloadSpec& w = s.workloads[i];
    std::string p = "workloads[" + std::to_string(i) + "]";
    if (w.kind != "raytrace" && w.kind != "coupled") return fail(p + ".kind", "unknown " + w.kind);
    if (w.tasks < 1) return fail(p + ".tasks", "must be >= 1");
    if (!user_names.count(w.owner)) return fail(p + ".owner", "undeclared identity " + w.owner);
    if (!w.vo.empty() && !vo_names.count(w.vo)) return fail(p + ".vo", "undeclared VO " + w.vo);
    if (auto st = check_logical(p + ".executable", w.executable); !st.ok()) return st;
    if (w.kind == "coupled")
      if (auto st = check_logical(p + ".stage_b_executable", w.stage_b_executable); !st.ok())
        return st;
    for (std::size_t j = 0; j < w.inputs.size(); j++)
      if (auto st = check_logical(p + ".inputs[" + std::to_string(j) + "]", w.inputs[j]); !st.ok())
        return st;
  }

  std::set<std::string> crashed;
  std::set<std::pair<std::string, std::string>> split;
  for (std::size_t i = 0; i < s.faults.events.size(); i++) {
    const FaultEvent& e = s.faults.events[i];
    std::string p = "faults.events[" + std::to_string(i) + "]";
    if (e.time_ms < 0 && e.after_done < 0) return fail(p, "no trigger (time_ms or after_done)");
    if (e.kind == "host-crash" || e.kind == "host-restart") {
      if (!host_names.count(e.target)) return fail(p + ".target", "unknown host " + e.target);
      if (e.kind == "host-restart" && !crashed.count(e.target))
        return fail(p, "restart without earlier crash of " + e.target);
      if (e.kind == "host-crash") crashed.insert(e.target);
    } else if (e.kind == "partition" || e.kind == "heal") {
      if (e.target.empty() || e.target2.empty()) return fail(p, "needs target and target2");
      auto pair = std::minmax(e.target, e.target2);
      if (e.kind == "heal" && !split.count({pair.first, pair.second}))
        return fail(p, "heal without earlier partition");
      if (e.kind == "partition") split.insert({pair.first, pair.second});
    } else {
      return fail(p + ".kind", "unknown " + e.kind);
    }
  }
  return ok_status();
}

// ---- outcomes and report ----

Value TaskOutcome::to_value() const {
  ValueRecord r;
  r["task_id"] = task_id;
  r["state"] = state;
  r["host"] = host;
  r["attempts"] = attempts;
  r["attempt_hosts"] = string_list(attempt_hosts);
  r["attempt_requests"] = string_list(attempt_requests);
  return Value(std::move(r));
}

Value ScenarioReport::to_value() const {
  ValueRecord r;
  r["scenario"] = scenario;
  r["seed"] = static_cast<std::int64_t>(seed);
  r["finished_ms"] = finished_ms;
  ValueList tl;
  for (const TaskOutcome& t : tasks) tl.push_back(t.to_value());
  r["tasks"] = Value(std::move(tl));
  ValueRecord pc;
  for (const auto& [proto, n] : protocol_counts) pc[proto] = n;
  r["protocol_counts"] = Value(std::move(pc));
  ValueList un;
  for (const auto& [who, n] : unlocks)
    un.push_back(Value(ValueRecord{{"identity", Value(who)}, {"unlocks", Value(n)}}));
  r["unlocks"] = Value(std::move(un));
  ValueList pi;
  for (const auto& [who, n] : proxy_inits)
    pi.push_back(Value(ValueRecord{{"identity", Value(who)}, {"proxies", Value(n)}}));
  r["proxy_inits"] = Value(std::move(pi));
  r["policy_decisions"] = Value(ValueList(policy_decisions.begin(), policy_decisions.end()));
  r["failure_events"] = Value(ValueList(failure_events.begin(), failure_events.end()));
  ValueList tr;
  for (const TraceEntry& e : trace) {
    ValueRecord t;
    t["seq"] = e.seq;
    t["time_ms"] = e.time_ms;
    t["from"] = e.from;
    t["to"] = e.to;
    t["protocol"] = e.protocol;
    t["message_type"] = e.message_type;
    t["request_id"] = e.request_id;
    t["is_response"] = e.is_response;
    t["status"] = e.status;
    tr.push_back(Value(std::move(t)));
  }
  r["trace"] = Value(std::move(tr));
  return Value(std::move(r));
}

std::string ScenarioReport::summary() const {
  std::string out = "scenario " + scenario + " seed " + std::to_string(seed) + " finished at " +
                    std::to_string(finished_ms) + " ms\n";
  std::int64_t done = 0;
  for (const TaskOutcome& t : tasks)
    if (t.state == "done") done++;
  out += "tasks: " + std::to_string(tasks.size()) + " (" + std::to_string(done) + " done)\n";
  out += "messages:";
  for (const auto& [proto, n] : protocol_counts) out += " " + proto + "=" + std::to_string(n);
  out += "\nsecret unlocks:";
  for (const auto& [who, n] : unlocks) out += " " + who + "=" + std::to_string(n);
  out += "\npolicy decisions: " + std::to_string(policy_decisions.size());
  out += "\nfailure events: " + std::to_string(failure_events.size());
  out += "\ntrace entries: " + std::to_string(trace.size()) + "\n";
  return out;
}

// ---- runtime ----

ScenarioRuntime::~ScenarioRuntime() = default;

Result<std::unique_ptr<ScenarioRuntime>> ScenarioRuntime::boot(const Scenario& s) {
  if (auto v = validate_scenario(s); !v.ok()) return v.error();
  std::unique_ptr<ScenarioRuntime> rt(new ScenarioRuntime());
  if (auto st = rt->setup(s); !st.ok()) return st.error();
  return rt;
}

Status ScenarioRuntime::setup(const Scenario& s) {
  scenario_ = s;
  net_ = SimNet(s.net);
  root_key_ = keys_->create_key(root_.name, true);
  trust_.anchors[root_.name] = root_key_;
  std::int64_t now = net_.now_ms();

  auto service_chain = [&](const std::string& name) {
    return *issue_credential(*keys_, root_, root_key_, Identity{name, IdentityKind::Service},
                             Rights::all(), 0, now + 2 * kWeekMs);
  };

  // Community authorization servers first: hosts anchor their keys.
  for (const VoSpec& v : s.vos) {
    if (!v.run_ca) continue;
    VoConfig vc;
    vc.vo = v.name;
    vc.roster = v.roster;
    vc.community_rights = v.community_rights;
    auto ca = std::make_unique<CommunityAuthService>(
        net_, keys_, service_chain("/vo=" + v.name + "/service=cas"), trust_, vc);
    ca->start();
    trust_.anchors[ca->identity_name()] = ca->anchor_key();
    cas_[v.name] = std::move(ca);
  }

  const std::string& home = s.organizations.front().name;

  IndexConfig ic;
  ic.org = home;
  ic.name = "index";
  ic.trust = trust_;
  index_ = std::make_unique<IndexService>(net_, keys_,
                                          service_chain("/org=" + home + "/service=index"), ic);
  index_->start();
  timers_.push_back(
      net_.schedule_every(ic.sweep_period_ms, [this] { index_->sweep(net_.now_ms()); }));

  for (const OrgSpec& org : s.organizations) {
    for (const HostSpec& hs : org.hosts) {
      HostConfig c;
      c.org = org.name;
      c.name = hs.name;
      c.gridmap = org.gridmap;
      c.gridmap.entries[kAdminIdentity] = "hadmin";
      c.policy = hs.policy.empty() ? org.policy : hs.policy;
      if (c.policy.empty()) c.policy = allow_all_policy();
      c.policy.push_back(PolicyRule{kAdminIdentity, "*", "*", "*", true, {}});
      c.trust = trust_;
      c.trust_community_ca = !cas_.empty();
      auto host = std::make_unique<ResourceHost>(
          net_, keys_, service_chain("/org=" + org.name + "/host=" + hs.name), c, &fabric_);
      if (hs.compute_slots > 0) host->attach_compute(hs.compute_slots, hs.slot_speed, hs.tags);
      if (hs.storage_bytes > 0) host->attach_storage(hs.storage_bytes, hs.tags);
      if (hs.catalog) host->attach_catalog();
      if (hs.calendar_capacity > 0) host->set_calendar_capacity(hs.calendar_capacity);
      host->start();
      for (const auto& [path, content] : hs.files)
        if (host->storage())
          if (auto st = host->storage()->put_file(path, content); !st.ok()) return st.error();
      if (hs.catalog && catalog_ep_.name.empty()) catalog_ep_ = host->endpoint();
      host_by_name_[hs.name] = host.get();
      hosts_.push_back(std::move(host));
    }
  }

  for (auto& host : hosts_) {
    auto gen = host->register_with(index_->endpoint(), s.index_ttl_ms);
    if (!gen.ok()) return gen.error();
    if (s.auto_refresh) {
      ResourceHost* h = host.get();
      std::int64_t period = std::max<std::int64_t>(s.index_ttl_ms / 2, 500);
      timers_.push_back(net_.schedule_every(period, [this, h] {
        if (h->alive()) (void)h->refresh_with(index_->endpoint(), scenario_.index_ttl_ms);
      }));
    }
  }

  CoReservationConfig cc;
  cc.org = home;
  cc.name = "coalloc";
  cc.trust = trust_;
  cc.policy = s.coalloc_policy.empty() ? allow_all_policy() : s.coalloc_policy;
  cc.index = index_->endpoint();
  coalloc_ = std::make_unique<CoReservationService>(
      net_, keys_, service_chain("/org=" + home + "/service=coalloc"), cc);
  coalloc_->start();

  // Every user performs one proxy init; workloads only ever see the
  // proxy, so the long-term unlock count stays at one per identity.
  auto init_user = [&](const std::string& name, const Rights& rights) -> Status {
    auto longterm = issue_credential(*keys_, root_, root_key_, Identity{name, IdentityKind::User},
                                     rights, 0, now + 2 * kWeekMs);
    if (!longterm.ok()) return longterm.error();
    auto proxy = create_proxy(*keys_, *longterm, rights, kWeekMs, now);
    if (!proxy.ok()) return proxy.error();
    proxies_[name] = *proxy;
    proxy_inits_[name] = 1;
    return ok_status();
  };
  for (const UserSpec& u : s.users)
    if (auto st = init_user(u.name, u.rights); !st.ok()) return st;
  if (auto st = init_user(kAdminIdentity, Rights::all()); !st.ok()) return st;
  admin_proxy_ = proxies_[kAdminIdentity];

  if (!s.replicas.empty()) {
    if (catalog_ep_.name.empty())
      return make_error(Err::ValidationError, "replicas: no catalog host declared");
    GridClient admin(net_, EndpointAddress{"harness", "client", "admin"}, keys_, trust_,
                     admin_proxy_);
    for (const ReplicaSpec& r : s.replicas)
      for (const ReplicaCopy& copy : r.copies)
        if (auto st = replica_register(admin, catalog_ep_, r.logical, copy, r.size); !st.ok())
          return st;
  }

  for (const FaultEvent& ev : s.faults.events) {
    if (ev.time_ms >= 0) {
      std::int64_t delay = std::max<std::int64_t>(ev.time_ms - net_.now_ms(), 0);
      net_.schedule(delay, [this, ev] { fire_fault(ev); });
    } else {
      pending_faults_.push_back(ev);
    }
  }
  return ok_status();
}

ResourceHost* ScenarioRuntime::host(const std::string& name) {
  auto it = host_by_name_.find(name);
  return it == host_by_name_.end() ? nullptr : it->second;
}

CommunityAuthService* ScenarioRuntime::ca_server(const std::string& vo) {
  auto it = cas_.find(vo);
  return it == cas_.end() ? nullptr : it->second.get();
}

const Chain& ScenarioRuntime::user_proxy(const std::string& name) const {
  return proxies_.at(name);
}

GridClient ScenarioRuntime::client_for(const std::string& user) {
  return GridClient(net_,
                    EndpointAddress{"harness", "client", "c" + std::to_string(++client_counter_)},
                    keys_, trust_, proxies_.at(user));
}

void ScenarioRuntime::fire_fault(const FaultEvent& ev) {
  ValueRecord rec;
  rec["time_ms"] = net_.now_ms();
  rec["kind"] = ev.kind;
  rec["target"] = ev.target;
  if (!ev.target2.empty()) rec["target2"] = ev.target2;
  fired_faults_.push_back(Value(std::move(rec)));

  auto key_of = [this](const std::string& target) {
    ResourceHost* h = host(target);
    return h ? h->endpoint().key() : target;
  };
  if (ev.kind == "host-crash") {
    if (ResourceHost* h = host(ev.target)) h->crash();
  } else if (ev.kind == "host-restart") {
    if (ResourceHost* h = host(ev.target)) {
      h->restart();
      (void)h->register_with(index_->endpoint(), scenario_.index_ttl_ms);
    }
  } else if (ev.kind == "partition") {
    net_.partition(key_of(ev.target), key_of(ev.target2));
  } else if (ev.kind == "heal") {
    net_.heal(key_of(ev.target), key_of(ev.target2));
  }
}

void ScenarioRuntime::fire_progress_faults(const std::string& /*workload_kind*/,
                                           std::int64_t done) {
  for (auto it = pending_faults_.begin(); it != pending_faults_.end();) {
    if (it->after_done >= 0 && done >= it->after_done) {
      FaultEvent ev = *it;
      it = pending_faults_.erase(it);
      fire_fault(ev);
    } else {
      ++it;
    }
  }
}

Result<std::string> ScenarioRuntime::wait_job(GridClient& c, const EndpointAddress& host,
                                              const std::string& job_id, std::int64_t deadline,
                                              std::int64_t poll_ms) {
  while (true) {
    auto st = c.job_status(host, job_id);
    if (st.ok()) {
      std::string state = st->string_or("state", "");
      if (state == "done" || state == "failed" || state == "cancelled") return state;
    } else if (st.code() != Err::Timeout) {
      return st.error();
    }
    if (net_.now_ms() > deadline) return make_error(Err::Deadline, "job " + job_id);
    net_.sleep_ms(poll_ms);
  }
}

Result<std::vector<TaskOutcome>> ScenarioRuntime::run_workload(const WorkloadSpec& w) {
  if (w.kind == "raytrace") return run_raytrace(w);
  if (w.kind == "coupled") return run_coupled(w);
  return make_error(Err::ValidationError, "workload.kind: unknown " + w.kind);
}

Result<std::vector<TaskOutcome>> ScenarioRuntime::run_raytrace(const WorkloadSpec& w) {
  GridClient client = client_for(w.owner);
  GridClient admin(net_, EndpointAddress{"harness", "client", "resolver"}, keys_, trust_,
                   admin_proxy_);

  // Logical name -> best physical copy, via the replica catalog. Names
  // starting with '/' are literal paths already present on the hosts.
  struct Source {
    std::optional<EndpointAddress> ep;
    std::string path;
  };
  auto resolve = [&](const std::string& logical) -> Result<Source> {
    if (!logical.empty() && logical[0] == '/') return Source{std::nullopt, logical};
    auto copies = replica_locate(admin, catalog_ep_, logical);
    if (!copies.ok()) return copies.error();
    auto best = replica_select(*copies);
    if (!best.ok()) return best.error();
    return Source{best->endpoint, best->path};
  };

  struct TaskRec {
    std::string id;
    std::int64_t units;
    std::string state = "pending";  // pending | submitted | done | denied
    EndpointAddress host;
    std::string host_name;
    std::string job_id;
    TaskOutcome out;
  };
  std::vector<TaskRec> tasks(static_cast<std::size_t>(w.tasks));
  for (std::size_t i = 0; i < tasks.size(); i++) {
    tasks[i].id = (w.name.empty() ? w.kind : w.name) + "-t" + std::to_string(i + 1);
    tasks[i].units =
        w.work_units + (w.work_units_spread > 0
                            ? static_cast<std::int64_t>(i) % (w.work_units_spread + 1)
                            : 0);
    tasks[i].out.task_id = tasks[i].id;
  }

  auto attempt = [&](TaskRec& t, const Value& cand) -> Result<std::string> {
    EndpointAddress ep = EndpointAddress::from_value(*cand.find("endpoint"));
    auto exe = resolve(w.executable);
    if (!exe.ok()) return exe.error();
    JobSpec job;
    job.executable = exe->path;
    job.work_units = t.units;
    job.output = "/out/" + t.id;
    job.vo = w.vo;
    job.constraints["problem_size"] = t.units;
    if (exe->ep) {
      job.stage_source = exe->ep;
      job.stage_paths.push_back(exe->path);
    }
    for (const std::string& logical : w.inputs) {
      auto in = resolve(logical);
      if (!in.ok()) return in.error();
      job.inputs.push_back(in->path);
      if (!in->ep) continue;
      if (exe->ep && *in->ep == *exe->ep) {
        job.stage_paths.push_back(in->path);
      } else {
        // Different source: move the data host-to-host beforehand.
        auto moved = client.transfer(*in->ep, in->path, ep, in->path, w.vo);
        if (!moved.ok()) return moved.error();
      }
    }
    std::string rid = client.raw().new_request_id();
    auto job_id = client.allocate(ep, job, rid);
    if (!job_id.ok()) return job_id.error();
    t.host = ep;
    t.host_name = cand.string_or("name", ep.name);
    t.job_id = *job_id;
    t.out.attempts++;
    t.out.attempt_hosts.push_back(t.host_name);
    t.out.attempt_requests.push_back(rid);
    return *job_id;
  };

  Requirements req = w.requirements;
  if (req.type.empty()) req.type = "compute";
  std::int64_t deadline = net_.now_ms() + w.deadline_ms;
  std::size_t rr = 0;
  std::int64_t done = 0;
  bool ever_candidates = false;

  while (true) {
    fire_progress_faults(w.kind, done);
    bool open = false;
    for (const TaskRec& t : tasks)
      if (t.state == "pending" || t.state == "submitted") open = true;
    if (!open) break;
    if (net_.now_ms() > deadline)
      return ever_candidates ? make_error(Err::Deadline, "raytrace " + w.name)
                             : make_error(Err::Starvation, "no eligible host for " + w.name);

    auto ranked = discover_and_rank(client, index_->endpoint(), req);
    std::vector<Value> candidates = ranked.ok() ? *ranked : std::vector<Value>{};
    if (!candidates.empty()) ever_candidates = true;

    for (TaskRec& t : tasks) {
      if (t.state != "pending" || candidates.empty()) continue;
      std::size_t denied = 0;
      for (std::size_t tried = 0; tried < candidates.size(); tried++) {
        const Value& cand = candidates[rr++ % candidates.size()];
        auto res = attempt(t, cand);
        if (res.ok()) {
          t.state = "submitted";
          break;
        }
        if (denial_error(res.code())) denied++;
      }
      // Only a unanimous denial is final; transient failures get
      // another wave.
      if (t.state == "pending" && denied == candidates.size()) t.state = "denied";
    }

    net_.sleep_ms(w.poll_ms);

    for (TaskRec& t : tasks) {
      if (t.state != "submitted") continue;
      auto st = client.job_status(t.host, t.job_id);
      if (st.ok()) {
        std::string state = st->string_or("state", "");
        if (state == "done") {
          t.state = "done";
          done++;
        } else if (state == "failed" || state == "cancelled") {
          t.state = "pending";  // task-level restart: re-queue, fresh id
        }
      } else if (st.code() != Err::Timeout) {
        t.state = "pending";  // host gone; re-queue elsewhere
      }
    }
  }

  std::vector<TaskOutcome> out;
  for (TaskRec& t : tasks) {
    t.out.state = t.state;
    t.out.host = t.host_name;
    out.push_back(std::move(t.out));
  }
  return out;
}

Result<std::vector<TaskOutcome>> ScenarioRuntime::run_coupled(const WorkloadSpec& w) {
  GridClient client = client_for(w.owner);
  std::int64_t deadline = net_.now_ms() + w.deadline_ms;

  Requirements req = w.requirements;
  if (req.type.empty()) req.type = "compute";
  auto ranked = discover_and_rank(client, index_->endpoint(), req);
  if (!ranked.ok()) return ranked.error();
  const Value* a = nullptr;
  const Value* b = nullptr;
  for (const Value& d : *ranked) {
    if (!a) {
      a = &d;
    } else if (d.string_or("org", "") != a->string_or("org", "")) {
      b = &d;
      break;
    }
  }
  if (!a || !b)
    return make_error(Err::ValidationError, "coupled: needs compute hosts in two organizations");
  EndpointAddress host_a = EndpointAddress::from_value(*a->find("endpoint"));
  EndpointAddress host_b = EndpointAddress::from_value(*b->find("endpoint"));

  // Both compute windows are reserved and confirmed before any work
  // starts; a co-reservation failure means zero fabric activity.
  std::int64_t start = net_.now_ms() + 1000;
  std::int64_t window = std::max<std::int64_t>(w.work_units * 2000, 10000);
  std::vector<PlanLeg> legs{{host_a, start, start + window, 1},
                            {host_b, start, start + window, 1}};
  auto plan = co_reserve_end_to_end(client.raw(), coalloc_->endpoint(), client.chain(), w.vo,
                                    legs);
  if (!plan.ok()) return plan.error();

  std::string wname = w.name.empty() ? w.kind : w.name;
  std::vector<TaskOutcome> out;
  TaskOutcome plan_out;
  plan_out.task_id = wname + "-plan";
  plan_out.state = plan->state;
  plan_out.host = host_a.name + "+" + host_b.name;
  plan_out.attempts = 1;
  plan_out.attempt_requests = plan->reservation_ids;
  out.push_back(plan_out);

  GridClient admin(net_, EndpointAddress{"harness", "client", "resolver"}, keys_, trust_,
                   admin_proxy_);
  auto resolve = [&](const std::string& logical)
      -> Result<std::pair<std::optional<EndpointAddress>, std::string>> {
    if (!logical.empty() && logical[0] == '/')
      return std::pair<std::optional<EndpointAddress>, std::string>{std::nullopt, logical};
    auto copies = replica_locate(admin, catalog_ep_, logical);
    if (!copies.ok()) return copies.error();
    auto best = replica_select(*copies);
    if (!best.ok()) return best.error();
    return std::pair<std::optional<EndpointAddress>, std::string>{best->endpoint, best->path};
  };

  auto run_stage = [&](const EndpointAddress& host, const std::string& exe_logical,
                       const std::vector<std::string>& inputs, const std::string& output,
                       const std::string& stage_id) -> Result<TaskOutcome> {
    auto exe = resolve(exe_logical);
    if (!exe.ok()) return exe.error();
    JobSpec job;
    job.executable = exe->second;
    job.work_units = w.work_units;
    job.inputs = inputs;
    job.output = output;
    job.vo = w.vo;
    if (exe->first) {
      job.stage_source = exe->first;
      job.stage_paths.push_back(exe->second);
    }
    std::string rid = client.raw().new_request_id();
    auto job_id = client.allocate(host, job, rid);
    if (!job_id.ok()) return job_id.error();
    auto state = wait_job(client, host, *job_id, deadline, w.poll_ms);
    if (!state.ok()) return state.error();
    if (*state != "done")
      return make_error(Err::Aborted, stage_id + " finished " + *state);
    TaskOutcome t;
    t.task_id = stage_id;
    t.state = *state;
    t.host = host.name;
    t.attempts = 1;
    t.attempt_hosts.push_back(host.name);
    t.attempt_requests.push_back(rid);
    return t;
  };

  std::string a_out = "/coupled/" + wname + ".a.out";
  std::string b_in = "/coupled/" + wname + ".b.in";
  std::string b_out = "/coupled/" + wname + ".b.out";

  auto stage_a = run_stage(host_a, w.executable, {}, a_out, wname + "-stage-a");
  if (!stage_a.ok()) return stage_a.error();
  out.push_back(*stage_a);

  fire_progress_faults(w.kind, 1);

  // The output moves host-to-host; this client only steers.
  TaskOutcome xfer;
  xfer.task_id = wname + "-transfer";
  xfer.host = host_a.name + ">" + host_b.name;
  while (true) {
    xfer.attempts++;
    auto moved = client.transfer(host_a, a_out, host_b, b_in, w.vo, w.streams);
    if (moved.ok()) {
      xfer.state = "done";
      break;
    }
    fire_progress_faults(w.kind, 2);
    if (net_.now_ms() > deadline)
      return make_error(Err::Deadline, "transfer " + xfer.task_id + ": " +
                                           moved.error().to_string());
    net_.sleep_ms(w.poll_ms);
  }
  out.push_back(xfer);

  auto stage_b = run_stage(host_b, w.stage_b_executable, {b_in}, b_out, wname + "-stage-b");
  if (!stage_b.ok()) return stage_b.error();
  out.push_back(*stage_b);
  return out;
}

void ScenarioRuntime::shutdown() {
  if (shut_down_) return;
  shut_down_ = true;
  for (std::int64_t t : timers_) net_.cancel_periodic(t);
  timers_.clear();
  // Registrations now age out; sweep until the index has forgotten
  // every host, so soft state converges to "grid gone".
  std::int64_t sweep = 1000;
  std::int64_t rounds = scenario_.index_ttl_ms / sweep + 2;
  for (std::int64_t i = 0; i < rounds && !index_->registrations().empty(); i++) {
    net_.sleep_ms(sweep);
    index_->sweep(net_.now_ms());
  }
}

ScenarioReport ScenarioRuntime::report() {
  ScenarioReport r;
  r.scenario = scenario_.name;
  r.seed = scenario_.net.seed;
  r.finished_ms = net_.now_ms();
  r.protocol_counts = net_.protocol_counts();
  for (const UserSpec& u : scenario_.users) r.unlocks[u.name] = keys_->unlock_count(u.name);
  r.unlocks[root_.name] = keys_->unlock_count(root_.name);
  r.proxy_inits = proxy_inits_;
  for (const auto& host : hosts_)
    for (const Value& d : host->decision_log()) r.policy_decisions.push_back(d);
  for (const Value& d : coalloc_->decision_log()) r.policy_decisions.push_back(d);
  for (const Value& f : fired_faults_) r.failure_events.push_back(f);
  for (const Value& e : index_->events()) r.failure_events.push_back(e);
  r.trace = net_.trace();
  return r;
}

Result<ScenarioReport> run_scenario(const Scenario& s) {
  auto booted = ScenarioRuntime::boot(s);
  if (!booted.ok()) return booted.error();
  ScenarioRuntime& rt = **booted;

  std::vector<TaskOutcome> all;
  for (const WorkloadSpec& w : s.workloads) {
    if (rt.net().now_ms() > s.deadline_ms)
      return make_error(Err::Deadline, "scenario budget exhausted");
    auto out = rt.run_workload(w);
    if (out.ok()) {
      for (TaskOutcome& t : *out) all.push_back(std::move(t));
    } else if (out.code() == Err::Starvation || out.code() == Err::Deadline ||
               out.code() == Err::ValidationError) {
      return out.error();
    } else {
      // Domain failures (denials, aborts) are outcomes, not crashes.
      TaskOutcome t;
      t.task_id = w.name.empty() ? w.kind : w.name;
      t.state = err_name(out.code());
      all.push_back(std::move(t));
    }
  }
  rt.shutdown();
  ScenarioReport rep = rt.report();
  rep.tasks = std::move(all);
  return rep;
}

}  // namespace grid
