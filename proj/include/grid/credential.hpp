// Identities, credentials, proxy chains, trust stores and gridmaps.
//
// A chain is stored root-first. Link 0 is a long-term credential signed
// by an authority; every later link is a proxy signed by its parent's
// key, acting as the root subject with rights that can only shrink.
// verify_chain consults only the local key store, a trust store and a
// clock -- never the network.

#ifndef GRID_CREDENTIAL_HPP_
#define GRID_CREDENTIAL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "grid/keystore.hpp"
#include "grid/rights.hpp"

namespace grid {

enum class IdentityKind { User, Service, Authority };

const char* identity_kind_name(IdentityKind k);
Result<IdentityKind> identity_kind_from_name(const std::string& name);

struct Identity {
  std::string name;  // hierarchical, e.g. "/org=A/user=alice"
  IdentityKind kind = IdentityKind::User;

  bool operator==(const Identity& o) const { return name == o.name && kind == o.kind; }
  Value to_value() const;
  static Result<Identity> from_value(const Value& v);
};

struct CredentialLink {
  Identity subject;
  Identity issuer;       // authority for link 0, parent subject for proxies
  Rights rights;         // effective rights at this link
  Rights restrictions;   // requested restriction set (== rights for link 0)
  std::int64_t not_before = 0;
  std::int64_t not_after = 0;
  std::string key_handle;  // the key this credential signs WITH
  Bytes signature;         // by the issuer's / parent's key

  Value to_value() const;
  static Result<CredentialLink> from_value(const Value& v);
  /// Bytes covered by the signature; parent_sig binds the chain.
  Bytes signing_bytes(const Bytes& parent_sig) const;
};

struct Chain {
  std::vector<CredentialLink> links;  // root first, never empty when valid

  const CredentialLink& root() const { return links.front(); }
  const CredentialLink& leaf() const { return links.back(); }
  std::size_t depth() const { return links.size(); }

  Value to_value() const;
  static Result<Chain> from_value(const Value& v);
};

struct TrustStore {
  // authority identity name -> verification key handle
  std::map<std::string, std::string> anchors;

  Value to_value() const;
  static Result<TrustStore> from_value(const Value& v);
};

inline constexpr std::size_t kMaxChainDepth = 16;
inline constexpr std::int64_t kClockSkewMs = 2000;

/// Long-term credential issuance; signs with the authority's key
/// (counts as one unlock for the authority). Creates a fresh long-term
/// key for the subject.
Result<Chain> issue_credential(KeyStore& keys, const Identity& authority,
                               const std::string& authority_key_handle,
                               const Identity& subject, const Rights& rights,
                               std::int64_t not_before, std::int64_t not_after);

/// Sign one proxy link onto `parent`. Signs with the parent's leaf key:
/// when the parent is the long-term credential this is the single
/// unlock of the long-term secret.
Result<Chain> create_proxy(KeyStore& keys, const Chain& parent,
                           const Rights& restrictions, std::int64_t lifetime_ms,
                           std::int64_t now_ms);

/// Pure verification: (root subject, effective rights) or the first
/// failing link's error. aux carries the link index where relevant.
Result<std::pair<Identity, Rights>> verify_chain(const Chain& leaf_chain,
                                                 const TrustStore& trust,
                                                 const KeyStore& keys,
                                                 std::int64_t now_ms);

// ---- Gridmap ----

struct GridMap {
  std::map<std::string, std::string> entries;  // identity name -> local account

  /// Exact-match lookup, no wildcards.
  Result<std::string> map_to_local(const std::string& identity_name) const;

  /// One "<identity> <account>" entry per line, '#' comments.
  static Result<GridMap> parse(const std::string& text);
  std::string to_text() const;
};

}  // namespace grid

#endif  // GRID_CREDENTIAL_HPP_
