// Mutual authentication over the "auth" protocol.
//
// Handshake: HELLO{chain,nonce} -> CHALLENGE{session,chain,nonce} ->
// PROOF{session,sig} -> ESTABLISHED{sig}. Each side verifies the other's
// chain against its local trust store; proofs are signed with the chain
// leaf key, so proxy-based authentication never touches a long-term
// secret. Established sessions let later requests carry just a session
// id plus an envelope signature by the same leaf key.

#ifndef GRID_AUTHPROTO_HPP_
#define GRID_AUTHPROTO_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "grid/credential.hpp"
#include "grid/transport.hpp"

namespace grid {

struct Session {
  std::string session_id;
  Identity peer;  // verified root subject
  Rights peer_rights;
  std::int64_t established_at = 0;
};

/// Server side: handshake state plus per-session verification of
/// follow-up requests.
class AuthServer {
 public:
  AuthServer(std::shared_ptr<KeyStore> keys, TrustStore trust, Chain own_chain);

  bool is_auth_message(const Envelope& req) const;
  Envelope handle(const Envelope& req, std::int64_t now_ms);

  struct SessionInfo {
    Identity peer;
    Rights rights;
    std::string leaf_key;
    Chain chain;  // the verified requester chain (kept for delegation)
    std::int64_t not_after = 0;
  };

  /// Validate a non-handshake request: session known + established,
  /// envelope signature by the session's leaf key, chain still valid.
  Result<SessionInfo> verify_request(const Envelope& req, std::int64_t now_ms) const;

  void clear_sessions() { sessions_.clear(); }
  const Chain& own_chain() const { return chain_; }
  const std::string& identity_name() const { return chain_.root().subject.name; }

 private:
  std::shared_ptr<KeyStore> keys_;
  TrustStore trust_;
  Chain chain_;
  struct Pending {
    SessionInfo info;
    Bytes client_nonce;
    Bytes server_nonce;
    bool established = false;
  };
  std::map<std::string, Pending> sessions_;
  std::int64_t session_counter_ = 0;
};

/// One full client-side handshake. peer_expected, when set, must equal
/// the verified server root identity.
Result<Session> client_authenticate(Transport& net, const EndpointAddress& self,
                                    const EndpointAddress& server, const Chain& chain,
                                    KeyStore& keys, const TrustStore& trust,
                                    std::optional<Identity> peer_expected);

/// Client with session caching, request signing and caller-driven
/// retries (same request_id on Timeout; one re-authentication on a
/// session the server lost).
class AuthClient {
 public:
  AuthClient(Transport& net, EndpointAddress self, std::shared_ptr<KeyStore> keys,
             TrustStore trust);

  /// Authenticated signed request; returns the reply envelope (which
  /// may still be a domain ERROR -- use error_from_reply).
  Result<Envelope> call(const EndpointAddress& server, const Chain& chain,
                        const std::string& protocol, const std::string& type,
                        Value payload, const std::string& request_id,
                        std::int64_t timeout_ms = 2000, int attempts = 3);

  /// Like call but converts ERROR replies into Error results.
  Result<Envelope> call_ok(const EndpointAddress& server, const Chain& chain,
                           const std::string& protocol, const std::string& type,
                           Value payload, const std::string& request_id,
                           std::int64_t timeout_ms = 2000, int attempts = 3);

  Result<Session> session_to(const EndpointAddress& server, const Chain& chain,
                             std::optional<Identity> peer_expected = std::nullopt);
  void invalidate(const EndpointAddress& server);

  // Proxy store operations.
  Status store_proxy(const EndpointAddress& store, const Chain& auth_chain,
                     const Chain& proxy, const std::string& tag);
  Result<Chain> fetch_proxy(const EndpointAddress& store, const Chain& auth_chain,
                            const std::string& subject, const std::string& tag);

  Transport& net() { return net_; }
  const EndpointAddress& self() const { return self_; }
  std::string new_request_id();

 private:
  Transport& net_;
  EndpointAddress self_;
  std::shared_ptr<KeyStore> keys_;
  TrustStore trust_;
  std::map<std::string, Session> sessions_;  // by server endpoint key + chain leaf key
  std::int64_t id_counter_ = 0;
};

}  // namespace grid

#endif  // GRID_AUTHPROTO_HPP_
