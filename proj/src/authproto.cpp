#include "grid/authproto.hpp"

namespace grid {

namespace {

Bytes concat(const Bytes& a, const Bytes& b) {
  Bytes out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Bytes nonce_from(const std::string& seed) { return to_bytes("nonce:" + seed); }

Envelope auth_request(const std::string& type, const std::string& request_id,
                      const std::string& sender, ValueRecord payload) {
  Envelope e;
  e.protocol = proto::kAuth;
  e.message_type = type;
  e.request_id = request_id;
  e.sender = sender;
  e.payload = Value(std::move(payload));
  return e;
}

}  // namespace

AuthServer::AuthServer(std::shared_ptr<KeyStore> keys, TrustStore trust, Chain own_chain)
    : keys_(std::move(keys)), trust_(std::move(trust)), chain_(std::move(own_chain)) {}

bool AuthServer::is_auth_message(const Envelope& req) const {
  return req.protocol == proto::kAuth &&
         (req.message_type == "HELLO" || req.message_type == "PROOF");
}

Envelope AuthServer::handle(const Envelope& req, std::int64_t now_ms) {
  const std::string& me = identity_name();
  if (req.message_type == "HELLO") {
    const Value* chain_v = req.payload.find("chain");
    const Value* nonce_v = req.payload.find("nonce");
    if (!chain_v || !nonce_v || !nonce_v->is_bytes())
      return make_error_reply(req, make_error(Err::AuthFailed, "bad HELLO"), me);
    auto chain = Chain::from_value(*chain_v);
    if (!chain) return make_error_reply(req, make_error(Err::AuthFailed, chain.error().to_string()), me);
    auto verdict = verify_chain(*chain, trust_, *keys_, now_ms);
    if (!verdict)
      return make_error_reply(req, make_error(Err::AuthFailed, verdict.error().to_string()), me);

    std::string sid = me + "#s" + std::to_string(++session_counter_);
    Pending p;
    p.info.peer = verdict->first;
    p.info.rights = verdict->second;
    p.info.leaf_key = chain->leaf().key_handle;
    p.info.chain = *chain;
    p.info.not_after = chain->leaf().not_after;
    p.client_nonce = nonce_v->as_bytes();
    p.server_nonce = nonce_from(sid);
    sessions_[sid] = p;

    ValueRecord reply;
    reply["session"] = sid;
    reply["chain"] = chain_.to_value();
    reply["nonce"] = p.server_nonce;
    return make_reply(req, "CHALLENGE", Value(std::move(reply)), me);
  }
  if (req.message_type == "PROOF") {
    std::string sid = req.payload.string_or("session", "");
    const Value* sig_v = req.payload.find("sig");
    auto it = sessions_.find(sid);
    if (it == sessions_.end() || !sig_v || !sig_v->is_bytes())
      return make_error_reply(req, make_error(Err::AuthFailed, "unknown session"), me);
    Pending& p = it->second;
    Bytes expected_data = concat(p.client_nonce, p.server_nonce);
    if (!keys_->verify(expected_data, sig_v->as_bytes(), p.info.leaf_key)) {
      sessions_.erase(it);
      return make_error_reply(req, make_error(Err::BadSignature, "bad proof"), me);
    }
    p.established = true;
    Bytes server_sig = keys_->sign(concat(p.server_nonce, p.client_nonce),
                                   chain_.leaf().key_handle);
    ValueRecord reply;
    reply["sig"] = server_sig;
    return make_reply(req, "ESTABLISHED", Value(std::move(reply)), me);
  }
  return make_error_reply(req, make_error(Err::AuthFailed, "unexpected auth message"), me);
}

Result<AuthServer::SessionInfo> AuthServer::verify_request(const Envelope& req,
                                                           std::int64_t now_ms) const {
  std::string sid = req.payload.string_or("session", "");
  auto it = sessions_.find(sid);
  if (it == sessions_.end() || !it->second.established)
    return make_error(Err::AuthFailed, "no session");
  const Pending& p = it->second;
  if (now_ms - kClockSkewMs > p.info.not_after)
    return make_error(Err::AuthFailed, "session credential expired");
  if (req.signature.empty() ||
      !keys_->verify(envelope_signing_bytes(req), req.signature, p.info.leaf_key))
    return make_error(Err::AuthFailed, "bad request signature");
  return p.info;
}

Result<Session> client_authenticate(Transport& net, const EndpointAddress& self,
                                    const EndpointAddress& server, const Chain& chain,
                                    KeyStore& keys, const TrustStore& trust,
                                    std::optional<Identity> peer_expected) {
  std::string rid1 = net.new_request_id();
  Bytes client_nonce = nonce_from(self.key() + "/" + rid1);

  ValueRecord hello;
  hello["chain"] = chain.to_value();
  hello["nonce"] = client_nonce;
  auto r1 = net.request(self, server,
                        auth_request("HELLO", rid1, chain.root().subject.name, std::move(hello)),
                        2000);
  if (!r1) return r1.error();
  if (is_error_reply(*r1)) return error_from_reply(*r1);
  if (r1->message_type != "CHALLENGE") return make_error(Err::AuthFailed, "expected CHALLENGE");

  const Value* server_chain_v = r1->payload.find("chain");
  const Value* server_nonce_v = r1->payload.find("nonce");
  std::string sid = r1->payload.string_or("session", "");
  if (!server_chain_v || !server_nonce_v || !server_nonce_v->is_bytes() || sid.empty())
    return make_error(Err::AuthFailed, "bad CHALLENGE");
  auto server_chain = Chain::from_value(*server_chain_v);
  if (!server_chain) return make_error(Err::AuthFailed, "bad server chain");
  auto verdict = verify_chain(*server_chain, trust, keys, net.now_ms());
  if (!verdict) return make_error(Err::AuthFailed, "server: " + verdict.error().to_string());
  if (peer_expected && !(verdict->first == *peer_expected))
    return make_error(Err::PeerMismatch, verdict->first.name);

  Bytes proof = keys.sign(concat(client_nonce, server_nonce_v->as_bytes()),
                          chain.leaf().key_handle);
  ValueRecord proofp;
  proofp["session"] = sid;
  proofp["sig"] = proof;
  auto r2 = net.request(self, server,
                        auth_request("PROOF", rid1 + "-p", chain.root().subject.name,
                                     std::move(proofp)),
                        2000);
  if (!r2) return r2.error();
  if (is_error_reply(*r2)) return error_from_reply(*r2);
  if (r2->message_type != "ESTABLISHED") return make_error(Err::AuthFailed, "expected ESTABLISHED");
  const Value* ssig = r2->payload.find("sig");
  if (!ssig || !ssig->is_bytes() ||
      !keys.verify(concat(server_nonce_v->as_bytes(), client_nonce), ssig->as_bytes(),
                   server_chain->leaf().key_handle))
    return make_error(Err::BadSignature, "server proof");

  Session s;
  s.session_id = sid;
  s.peer = verdict->first;
  s.peer_rights = verdict->second;
  s.established_at = net.now_ms();
  return s;
}

AuthClient::AuthClient(Transport& net, EndpointAddress self,
                       std::shared_ptr<KeyStore> keys, TrustStore trust)
    : net_(net), self_(std::move(self)), keys_(std::move(keys)), trust_(std::move(trust)) {}

std::string AuthClient::new_request_id() { return net_.new_request_id(); }

Result<Session> AuthClient::session_to(const EndpointAddress& server, const Chain& chain,
                                       std::optional<Identity> peer_expected) {
  std::string key = server.key() + "|" + chain.leaf().key_handle;
  auto it = sessions_.find(key);
  if (it != sessions_.end()) return it->second;
  auto s = client_authenticate(net_, self_, server, chain, *keys_, trust_, peer_expected);
  if (!s) return s;
  sessions_[key] = *s;
  return s;
}

void AuthClient::invalidate(const EndpointAddress& server) {
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (it->first.rfind(server.key() + "|", 0) == 0) it = sessions_.erase(it);
    else ++it;
  }
}

Result<Envelope> AuthClient::call(const EndpointAddress& server, const Chain& chain,
                                  const std::string& protocol, const std::string& type,
                                  Value payload, const std::string& request_id,
                                  std::int64_t timeout_ms, int attempts) {
  bool reauthed = false;
  for (int attempt = 0; attempt < attempts; attempt++) {
    auto session = session_to(server, chain);
    if (!session) {
      if (session.code() == Err::Timeout && attempt + 1 < attempts) continue;
      return session.error();
    }
    Envelope e;
    e.protocol = protocol;
    e.message_type = type;
    e.request_id = request_id;
    e.sender = chain.root().subject.name;
    Value p = payload;
    p.set("session", Value(session->session_id));
    e.payload = std::move(p);
    e.signature = keys_->sign(envelope_signing_bytes(e), chain.leaf().key_handle);

    auto reply = net_.request(self_, server, e, timeout_ms);
    if (!reply) {
      if (reply.code() == Err::Timeout && attempt + 1 < attempts) continue;
      return reply.error();
    }
    if (is_error_reply(*reply) && error_from_reply(*reply).code == Err::AuthFailed &&
        !reauthed) {
      // server lost the session (restart); one re-authentication
      invalidate(server);
      reauthed = true;
      attempt--;
      continue;
    }
    return reply;
  }
  return make_error(Err::Timeout, server.key());
}

Result<Envelope> AuthClient::call_ok(const EndpointAddress& server, const Chain& chain,
                                     const std::string& protocol, const std::string& type,
                                     Value payload, const std::string& request_id,
                                     std::int64_t timeout_ms, int attempts) {
  auto r = call(server, chain, protocol, type, std::move(payload), request_id, timeout_ms,
                attempts);
  if (!r) return r;
  if (is_error_reply(*r)) return error_from_reply(*r);
  return r;
}

Status AuthClient::store_proxy(const EndpointAddress& store, const Chain& auth_chain,
                               const Chain& proxy, const std::string& tag) {
  ValueRecord p;
  p["proxy"] = proxy.to_value();
  p["tag"] = tag;
  auto r = call_ok(store, auth_chain, proto::kAuth, "PROXY-STORE", Value(std::move(p)),
                   new_request_id());
  if (!r) return r.error();
  return ok_status();
}

Result<Chain> AuthClient::fetch_proxy(const EndpointAddress& store, const Chain& auth_chain,
                                      const std::string& subject, const std::string& tag) {
  ValueRecord p;
  p["subject"] = subject;
  p["tag"] = tag;
  auto r = call_ok(store, auth_chain, proto::kAuth, "PROXY-FETCH", Value(std::move(p)),
                   new_request_id());
  if (!r) return r.error();
  const Value* proxy = r->payload.find("proxy");
  if (!proxy) return make_error(Err::Malformed, "missing proxy in reply");
  return Chain::from_value(*proxy);
}

}  // namespace grid
