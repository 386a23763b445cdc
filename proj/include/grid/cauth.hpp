// Community authorization server: turns VO membership into signed
// capabilities that resources verify offline.

#ifndef GRID_CAUTH_HPP_
#define GRID_CAUTH_HPP_

#include <memory>
#include <set>
#include <string>

#include "grid/authproto.hpp"
#include "grid/capability.hpp"

namespace grid {

struct VoConfig {
  std::string vo;
  std::set<std::string> roster;  // member identity names
  Rights community_rights;
  std::int64_t cap_lifetime_ms = 3600000;
};

class CommunityAuthService {
 public:
  CommunityAuthService(Transport& net, std::shared_ptr<KeyStore> keys, Chain service_chain,
                       TrustStore trust, VoConfig vo);

  void start();
  void stop();
  const EndpointAddress& endpoint() const { return addr_; }
  const std::string& identity_name() const { return auth_.identity_name(); }
  /// Verifiers anchor this: (service identity name -> long-term key).
  std::string anchor_key() const { return chain_.root().key_handle; }

  Envelope handle(const Envelope& req);

 private:
  Transport& net_;
  std::shared_ptr<KeyStore> keys_;
  Chain chain_;
  VoConfig vo_;
  EndpointAddress addr_;
  AuthServer auth_;
  bool alive_ = false;
};

/// Client side: ask the CA server for a capability over "cauth".
Result<Capability> request_capability(AuthClient& client, const EndpointAddress& ca,
                                      const Chain& chain, const std::string& vo,
                                      const Rights& requested,
                                      const std::string& resource_pattern);

}  // namespace grid

#endif  // GRID_CAUTH_HPP_
