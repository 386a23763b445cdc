#include "grid/capability.hpp"

namespace grid {

Value Capability::to_value() const {
  ValueRecord r;
  r["holder"] = holder;
  r["vo"] = vo;
  r["operations"] = operations.to_value();
  r["resource_pattern"] = resource_pattern;
  r["not_after"] = not_after;
  r["issuer"] = issuer;
  r["signature"] = signature;
  return Value(std::move(r));
}

Bytes Capability::signing_bytes() const {
  Capability unsigned_copy = *this;
  unsigned_copy.signature.clear();
  return to_bytes(encode_value(unsigned_copy.to_value()));
}

Result<Capability> Capability::from_value(const Value& v) {
  if (!v.is_record()) return make_error(Err::Malformed, "capability is not a record");
  Capability c;
  c.holder = v.string_or("holder", "");
  c.vo = v.string_or("vo", "");
  c.resource_pattern = v.string_or("resource_pattern", "");
  c.not_after = v.int_or("not_after", 0);
  c.issuer = v.string_or("issuer", "");
  if (const Value* ops = v.find("operations")) c.operations = Rights::from_value(*ops);
  if (const Value* sig = v.find("signature"); sig && sig->is_bytes()) c.signature = sig->as_bytes();
  if (c.holder.empty() || c.issuer.empty()) return make_error(Err::Malformed, "capability fields");
  return c;
}

bool verify_capability(const Capability& cap, const std::string& holder,
                       const std::string& resource, const TrustStore& trust,
                       const KeyStore& keys, std::int64_t now_ms) {
  auto anchor = trust.anchors.find(cap.issuer);
  if (anchor == trust.anchors.end()) return false;
  if (cap.holder != holder) return false;
  if (now_ms > cap.not_after + kClockSkewMs) return false;
  if (!glob_match(cap.resource_pattern, resource)) return false;
  return keys.verify(cap.signing_bytes(), cap.signature, anchor->second);
}

}  // namespace grid
