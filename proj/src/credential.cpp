#include "grid/credential.hpp"

#include <algorithm>
#include <sstream>

namespace grid {

const char* identity_kind_name(IdentityKind k) {
  switch (k) {
    case IdentityKind::User: return "user";
    case IdentityKind::Service: return "service";
    case IdentityKind::Authority: return "authority";
  }
  return "user";
}

Result<IdentityKind> identity_kind_from_name(const std::string& name) {
  if (name == "user") return IdentityKind::User;
  if (name == "service") return IdentityKind::Service;
  if (name == "authority") return IdentityKind::Authority;
  return make_error(Err::ValidationError, "bad identity kind: " + name);
}

Value Identity::to_value() const {
  return Value(ValueRecord{{"name", Value(name)},
                           {"kind", Value(std::string(identity_kind_name(kind)))}});
}

Result<Identity> Identity::from_value(const Value& v) {
  if (!v.is_record()) return make_error(Err::ValidationError, "identity: not a record");
  auto kind = identity_kind_from_name(v.string_or("kind", ""));
  if (!kind) return kind.error();
  Identity id{v.string_or("name", ""), *kind};
  if (id.name.empty()) return make_error(Err::ValidationError, "identity: empty name");
  return id;
}

Value CredentialLink::to_value() const {
  ValueRecord r;
  r["subject"] = subject.to_value();
  r["issuer"] = issuer.to_value();
  r["rights"] = rights.to_value();
  r["restrictions"] = restrictions.to_value();
  r["not_before"] = not_before;
  r["not_after"] = not_after;
  r["key_handle"] = key_handle;
  r["signature"] = signature;
  return Value(std::move(r));
}

Result<CredentialLink> CredentialLink::from_value(const Value& v) {
  if (!v.is_record()) return make_error(Err::ValidationError, "credential: not a record");
  CredentialLink link;
  auto subject = Identity::from_value(v.find("subject") ? *v.find("subject") : Value());
  if (!subject) return subject.error();
  auto issuer = Identity::from_value(v.find("issuer") ? *v.find("issuer") : Value());
  if (!issuer) return issuer.error();
  link.subject = *subject;
  link.issuer = *issuer;
  if (const Value* r = v.find("rights")) link.rights = Rights::from_value(*r);
  if (const Value* r = v.find("restrictions")) link.restrictions = Rights::from_value(*r);
  link.not_before = v.int_or("not_before", 0);
  link.not_after = v.int_or("not_after", 0);
  link.key_handle = v.string_or("key_handle", "");
  if (const Value* s = v.find("signature")) {
    if (!s->is_bytes()) return make_error(Err::ValidationError, "credential: bad signature");
    link.signature = s->as_bytes();
  }
  return link;
}

Bytes CredentialLink::signing_bytes(const Bytes& parent_sig) const {
  ValueRecord r;
  r["subject"] = subject.to_value();
  r["issuer"] = issuer.to_value();
  r["rights"] = rights.to_value();
  r["restrictions"] = restrictions.to_value();
  r["not_before"] = not_before;
  r["not_after"] = not_after;
  r["key_handle"] = key_handle;
  r["parent_sig"] = parent_sig;
  return to_bytes(encode_value(Value(std::move(r))));
}

Value Chain::to_value() const {
  ValueList l;
  for (const auto& link : links) l.push_back(link.to_value());
  return Value(std::move(l));
}

Result<Chain> Chain::from_value(const Value& v) {
  if (!v.is_list()) return make_error(Err::ValidationError, "chain: not a list");
  Chain c;
  for (const Value& lv : v.as_list()) {
    auto link = CredentialLink::from_value(lv);
    if (!link) return link.error();
    c.links.push_back(std::move(*link));
  }
  if (c.links.empty()) return make_error(Err::ValidationError, "chain: empty");
  return c;
}

Value TrustStore::to_value() const {
  ValueList l;
  for (const auto& [name, handle] : anchors) {
    l.push_back(Value(ValueRecord{{"authority", Value(name)}, {"handle", Value(handle)}}));
  }
  return Value(std::move(l));
}

Result<TrustStore> TrustStore::from_value(const Value& v) {
  if (!v.is_list()) return make_error(Err::ValidationError, "trust store: not a list");
  TrustStore t;
  for (const Value& e : v.as_list()) {
    std::string name = e.string_or("authority", "");
    std::string handle = e.string_or("handle", "");
    if (name.empty() || handle.empty())
      return make_error(Err::ValidationError, "trust store: bad anchor");
    t.anchors[name] = handle;
  }
  return t;
}

Result<Chain> issue_credential(KeyStore& keys, const Identity& authority,
                               const std::string& authority_key_handle,
                               const Identity& subject, const Rights& rights,
                               std::int64_t not_before, std::int64_t not_after) {
  if (authority.kind != IdentityKind::Authority)
    return make_error(Err::NotAnAuthority, authority.name);
  if (not_before >= not_after)
    return make_error(Err::ValidationError, "empty validity window");
  CredentialLink link;
  link.subject = subject;
  link.issuer = authority;
  link.rights = rights;
  link.restrictions = rights;
  link.not_before = not_before;
  link.not_after = not_after;
  link.key_handle = keys.create_key(subject.name, /*long_term=*/true);
  link.signature = keys.sign(link.signing_bytes({}), authority_key_handle);
  Chain c;
  c.links.push_back(std::move(link));
  return c;
}

Result<Chain> create_proxy(KeyStore& keys, const Chain& parent,
                           const Rights& restrictions, std::int64_t lifetime_ms,
                           std::int64_t now_ms) {
  if (parent.links.empty()) return make_error(Err::ValidationError, "empty parent chain");
  const CredentialLink& p = parent.leaf();
  if (now_ms > p.not_after + kClockSkewMs)
    return make_error(Err::ParentExpired, p.subject.name);
  if (parent.depth() >= kMaxChainDepth)
    return make_error(Err::ChainTooDeep, "", static_cast<std::int64_t>(parent.depth()));

  CredentialLink link;
  link.subject = parent.root().subject;  // a proxy acts as the user
  link.issuer = p.subject;
  link.restrictions = restrictions;
  link.rights = restrictions.intersect(p.rights);
  link.not_before = now_ms;
  link.not_after = std::min(now_ms + lifetime_ms, p.not_after);
  link.key_handle = keys.create_key(parent.root().subject.name, /*long_term=*/false);
  link.signature = keys.sign(link.signing_bytes(p.signature), p.key_handle);

  Chain c = parent;
  c.links.push_back(std::move(link));
  return c;
}

Result<std::pair<Identity, Rights>> verify_chain(const Chain& chain,
                                                 const TrustStore& trust,
                                                 const KeyStore& keys,
                                                 std::int64_t now_ms) {
  if (chain.links.empty()) return make_error(Err::BadSignature, "empty chain", 0);
  if (chain.depth() > kMaxChainDepth)
    return make_error(Err::ChainTooDeep, "", static_cast<std::int64_t>(chain.depth()));

  const CredentialLink& root = chain.root();
  auto anchor = trust.anchors.find(root.issuer.name);
  if (root.issuer.kind != IdentityKind::Authority || anchor == trust.anchors.end())
    return make_error(Err::UntrustedRoot, root.issuer.name);

  for (std::size_t i = 0; i < chain.links.size(); i++) {
    const CredentialLink& link = chain.links[i];
    std::int64_t idx = static_cast<std::int64_t>(i);
    if (now_ms + kClockSkewMs < link.not_before || now_ms - kClockSkewMs > link.not_after)
      return make_error(Err::Expired, link.subject.name, idx);
    const Bytes parent_sig = i == 0 ? Bytes{} : chain.links[i - 1].signature;
    const std::string& verify_handle =
        i == 0 ? anchor->second : chain.links[i - 1].key_handle;
    if (!keys.verify(link.signing_bytes(parent_sig), link.signature, verify_handle))
      return make_error(Err::BadSignature, link.subject.name, idx);
    if (i > 0) {
      const CredentialLink& parent = chain.links[i - 1];
      if (!link.rights.subset_of(parent.rights))
        return make_error(Err::RightsEscalation, link.subject.name, idx);
      if (link.not_after > parent.not_after)
        return make_error(Err::Expired, "validity grew", idx);
      if (!(link.subject == root.subject))
        return make_error(Err::BadSignature, "proxy subject differs from root", idx);
    }
  }
  return std::make_pair(root.subject, chain.leaf().rights);
}

Result<std::string> GridMap::map_to_local(const std::string& identity_name) const {
  auto it = entries.find(identity_name);
  if (it == entries.end()) return make_error(Err::NoMapping, identity_name);
  return it->second;
}

Result<GridMap> GridMap::parse(const std::string& text) {
  GridMap map;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream fields(line);
    std::string identity, account, extra;
    if (!(fields >> identity)) continue;  // blank line
    if (!(fields >> account) || (fields >> extra))
      return make_error(Err::ValidationError, "gridmap line " + std::to_string(lineno));
    if (map.entries.count(identity))
      return make_error(Err::ValidationError,
                        "gridmap: duplicate identity at line " + std::to_string(lineno));
    map.entries[identity] = account;
  }
  return map;
}

std::string GridMap::to_text() const {
  std::string out;
  for (const auto& [identity, account] : entries) {
    out += identity;
    out += " ";
    out += account;
    out += "\n";
  }
  return out;
}

}  // namespace grid
