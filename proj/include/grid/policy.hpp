// Policy application point: rule matching with deny-overrides and
// default deny. Pure functions over immutable values.

#ifndef GRID_POLICY_HPP_
#define GRID_POLICY_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grid/credential.hpp"
#include "grid/rights.hpp"

namespace grid {

enum class Comparator { Eq, Le, Ge };

struct Condition {
  std::string attribute;  // problem_size | duration | time_of_day | certified | ...
  Comparator comparator = Comparator::Eq;
  Value value;  // int, bool or string

  Value to_value() const;
  static Result<Condition> from_value(const Value& v);
};

struct PolicyRule {
  std::string principal_pattern;  // identity glob, e.g. "/org=A/*"
  std::string vo;                 // VO name or "*"
  std::string operation;          // right or "*"
  std::string resource_pattern;   // resource-name glob
  bool allow = false;
  std::vector<Condition> conditions;

  Value to_value() const;
  static Result<PolicyRule> from_value(const Value& v);
};

struct AccessRequest {
  std::string principal;  // identity name
  Rights effective_rights;
  std::string vo;
  std::string operation;
  std::string resource;
  std::map<std::string, Value> context;
};

struct Decision {
  bool allow = false;
  std::optional<std::size_t> matched_rule;
  std::vector<std::string> diagnostics;  // e.g. unknown-attribute notes
};

/// Anchored glob: a trailing '*' matches any remainder; otherwise exact.
bool glob_match(const std::string& pattern, const std::string& name);

/// All patterns match and all conditions hold. A condition naming an
/// attribute absent from the context makes the rule NOT match (with a
/// diagnostic appended when `diag` is given).
bool rule_matches(const PolicyRule& rule, const AccessRequest& request,
                  std::vector<std::string>* diag = nullptr);

/// Deny-overrides, default deny. The operation must additionally be in
/// the request's effective rights -- a right never delegated cannot be
/// granted by policy.
Decision evaluate(const AccessRequest& request, const std::vector<PolicyRule>& rules);

Value rules_to_value(const std::vector<PolicyRule>& rules);
Result<std::vector<PolicyRule>> rules_from_value(const Value& v);

}  // namespace grid

#endif  // GRID_POLICY_HPP_
