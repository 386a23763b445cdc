// Community-authorization capability: a signed token a resource can
// verify offline against its local trust anchors.

#ifndef GRID_CAPABILITY_HPP_
#define GRID_CAPABILITY_HPP_

#include <string>

#include "grid/credential.hpp"
#include "grid/policy.hpp"

namespace grid {

struct Capability {
  std::string holder;  // identity name
  std::string vo;
  Rights operations;
  std::string resource_pattern;
  std::int64_t not_after = 0;
  std::string issuer;  // CA service identity name
  Bytes signature;

  Value to_value() const;
  static Result<Capability> from_value(const Value& v);
  Bytes signing_bytes() const;
};

/// Local, offline check: signature by the issuer's anchored key, not
/// expired, held by `holder`, pattern covers `resource`.
bool verify_capability(const Capability& cap, const std::string& holder,
                       const std::string& resource, const TrustStore& trust,
                       const KeyStore& keys, std::int64_t now_ms);

}  // namespace grid

#endif  // GRID_CAPABILITY_HPP_
