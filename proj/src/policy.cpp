#include "grid/policy.hpp"

namespace grid {

namespace {

const char* comparator_name(Comparator c) {
  switch (c) {
    case Comparator::Eq: return "==";
    case Comparator::Le: return "<=";
    case Comparator::Ge: return ">=";
  }
  return "==";
}

Result<Comparator> comparator_from_name(const std::string& s) {
  if (s == "==") return Comparator::Eq;
  if (s == "<=") return Comparator::Le;
  if (s == ">=") return Comparator::Ge;
  return make_error(Err::ValidationError, "bad comparator: " + s);
}

bool compare(const Value& lhs, Comparator cmp, const Value& rhs) {
  if (lhs.is_int() && rhs.is_int()) {
    switch (cmp) {
      case Comparator::Eq: return lhs.as_int() == rhs.as_int();
      case Comparator::Le: return lhs.as_int() <= rhs.as_int();
      case Comparator::Ge: return lhs.as_int() >= rhs.as_int();
    }
  }
  if (lhs.is_bool() && rhs.is_bool()) {
    if (cmp == Comparator::Eq) return lhs.as_bool() == rhs.as_bool();
    return false;  // ordering comparators undefined for booleans
  }
  if (lhs.is_string() && rhs.is_string()) {
    switch (cmp) {
      case Comparator::Eq: return lhs.as_string() == rhs.as_string();
      case Comparator::Le: return lhs.as_string() <= rhs.as_string();
      case Comparator::Ge: return lhs.as_string() >= rhs.as_string();
    }
  }
  return false;  // type mismatch never matches
}

}  // namespace

Value Condition::to_value() const {
  ValueRecord r;
  r["attribute"] = attribute;
  r["comparator"] = std::string(comparator_name(comparator));
  r["value"] = value;
  return Value(std::move(r));
}

Result<Condition> Condition::from_value(const Value& v) {
  if (!v.is_record()) return make_error(Err::ValidationError, "condition: not a record");
  Condition c;
  c.attribute = v.string_or("attribute", "");
  if (c.attribute.empty()) return make_error(Err::ValidationError, "condition: empty attribute");
  auto cmp = comparator_from_name(v.string_or("comparator", "=="));
  if (!cmp) return cmp.error();
  c.comparator = *cmp;
  const Value* val = v.find("value");
  if (!val || !(val->is_int() || val->is_bool() || val->is_string()))
    return make_error(Err::ValidationError, "condition: bad value type");
  c.value = *val;
  return c;
}

Value PolicyRule::to_value() const {
  ValueRecord r;
  r["principal"] = principal_pattern;
  r["vo"] = vo;
  r["operation"] = operation;
  r["resource"] = resource_pattern;
  r["effect"] = std::string(allow ? "allow" : "deny");
  ValueList conds;
  for (const auto& c : conditions) conds.push_back(c.to_value());
  r["conditions"] = std::move(conds);
  return Value(std::move(r));
}

Result<PolicyRule> PolicyRule::from_value(const Value& v) {
  if (!v.is_record()) return make_error(Err::ValidationError, "rule: not a record");
  PolicyRule rule;
  rule.principal_pattern = v.string_or("principal", "*");
  rule.vo = v.string_or("vo", "*");
  rule.operation = v.string_or("operation", "*");
  rule.resource_pattern = v.string_or("resource", "*");
  std::string effect = v.string_or("effect", "");
  if (effect != "allow" && effect != "deny")
    return make_error(Err::ValidationError, "rule: effect must be allow or deny");
  rule.allow = effect == "allow";
  if (const Value* conds = v.find("conditions")) {
    if (!conds->is_list()) return make_error(Err::ValidationError, "rule: conditions not a list");
    for (const Value& cv : conds->as_list()) {
      auto c = Condition::from_value(cv);
      if (!c) return c.error();
      rule.conditions.push_back(std::move(*c));
    }
  }
  return rule;
}

bool glob_match(const std::string& pattern, const std::string& name) {
  if (pattern == "*") return true;
  if (!pattern.empty() && pattern.back() == '*') {
    std::string prefix = pattern.substr(0, pattern.size() - 1);
    return name.size() >= prefix.size() && name.compare(0, prefix.size(), prefix) == 0;
  }
  return pattern == name;
}

bool rule_matches(const PolicyRule& rule, const AccessRequest& request,
                  std::vector<std::string>* diag) {
  if (!glob_match(rule.principal_pattern, request.principal)) return false;
  if (rule.vo != "*" && rule.vo != request.vo) return false;
  if (rule.operation != "*" && rule.operation != request.operation) return false;
  if (!glob_match(rule.resource_pattern, request.resource)) return false;
  for (const auto& cond : rule.conditions) {
    auto it = request.context.find(cond.attribute);
    if (it == request.context.end()) {
      if (diag) diag->push_back("unknown attribute: " + cond.attribute);
      return false;
    }
    if (!compare(it->second, cond.comparator, cond.value)) return false;
  }
  return true;
}

Decision evaluate(const AccessRequest& request, const std::vector<PolicyRule>& rules) {
  Decision d;
  if (!request.effective_rights.contains(request.operation)) {
    d.diagnostics.push_back("operation outside delegated rights");
    return d;  // deny regardless of rules
  }
  std::optional<std::size_t> first_allow;
  for (std::size_t i = 0; i < rules.size(); i++) {
    if (!rule_matches(rules[i], request, &d.diagnostics)) continue;
    if (!rules[i].allow) {  // deny overrides
      d.allow = false;
      d.matched_rule = i;
      return d;
    }
    if (!first_allow) first_allow = i;
  }
  if (first_allow) {
    d.allow = true;
    d.matched_rule = first_allow;
  }
  return d;  // default deny
}

Value rules_to_value(const std::vector<PolicyRule>& rules) {
  ValueList l;
  for (const auto& r : rules) l.push_back(r.to_value());
  return Value(std::move(l));
}

Result<std::vector<PolicyRule>> rules_from_value(const Value& v) {
  if (!v.is_list()) return make_error(Err::ValidationError, "rules: not a list");
  std::vector<PolicyRule> rules;
  for (const Value& rv : v.as_list()) {
    auto r = PolicyRule::from_value(rv);
    if (!r) return r.error();
    rules.push_back(std::move(*r));
  }
  return rules;
}

}  // namespace grid
