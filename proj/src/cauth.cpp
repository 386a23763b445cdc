#include "grid/cauth.hpp"

namespace grid {

CommunityAuthService::CommunityAuthService(Transport& net, std::shared_ptr<KeyStore> keys,
                                           Chain service_chain, TrustStore trust, VoConfig vo)
    : net_(net),
      keys_(keys),
      chain_(std::move(service_chain)),
      vo_(std::move(vo)),
      addr_{vo_.vo, "ca-server", "cas"},
      auth_(keys, std::move(trust), chain_) {}

void CommunityAuthService::start() {
  net_.bind(addr_, [this](const Envelope& req) { return handle(req); });
  alive_ = true;
}

void CommunityAuthService::stop() {
  if (!alive_) return;
  net_.unbind(addr_);
  alive_ = false;
}

Envelope CommunityAuthService::handle(const Envelope& req) {
  std::int64_t now = net_.now_ms();
  const std::string& me = auth_.identity_name();
  if (auth_.is_auth_message(req)) return auth_.handle(req, now);
  auto session = auth_.verify_request(req, now);
  if (!session.ok()) return make_error_reply(req, session.error(), me, "auth");

  if (req.protocol != proto::kCauth || req.message_type != "REQUEST-CAP")
    return make_error_reply(req, make_error(Err::Malformed, "expected cauth REQUEST-CAP"), me);

  if (req.payload.string_or("vo", "") != vo_.vo)
    return make_error_reply(req, make_error(Err::NotMember, "wrong VO"), me);
  if (!vo_.roster.count(session->peer.name))
    return make_error_reply(req, make_error(Err::NotMember, session->peer.name), me);

  Rights requested;
  if (const Value* ops = req.payload.find("operations"))
    requested = Rights::from_value(*ops);
  Rights granted = requested.intersect(vo_.community_rights);
  if (granted.empty())
    return make_error_reply(req, make_error(Err::NothingGranted, requested.to_string()), me);

  Capability cap;
  cap.holder = session->peer.name;
  cap.vo = vo_.vo;
  cap.operations = granted;
  cap.resource_pattern = req.payload.string_or("resource_pattern", "*");
  cap.not_after = now + vo_.cap_lifetime_ms;
  cap.issuer = me;
  // Signed with the service's long-term key so any resource anchoring
  // that key can verify offline.
  cap.signature = keys_->sign(cap.signing_bytes(), chain_.root().key_handle);

  return make_reply(req, "CAPABILITY", Value(ValueRecord{{"capability", cap.to_value()}}), me);
}

Result<Capability> request_capability(AuthClient& client, const EndpointAddress& ca,
                                      const Chain& chain, const std::string& vo,
                                      const Rights& requested,
                                      const std::string& resource_pattern) {
  ValueRecord p;
  p["vo"] = vo;
  p["operations"] = requested.to_value();
  p["resource_pattern"] = resource_pattern;
  auto reply = client.call_ok(ca, chain, proto::kCauth, "REQUEST-CAP", Value(std::move(p)),
                              client.new_request_id());
  if (!reply.ok()) return reply.error();
  const Value* cap = reply->payload.find("capability");
  if (!cap) return make_error(Err::Malformed, "missing capability in reply");
  return Capability::from_value(*cap);
}

}  // namespace grid
