#include "grid/credstore.hpp"

#include <algorithm>

namespace grid {

CredStoreService::CredStoreService(std::shared_ptr<KeyStore> keys, TrustStore trust,
                                   Chain own_chain)
    : keys_(keys), auth_(std::move(keys), std::move(trust), std::move(own_chain)) {}

void CredStoreService::bind(Transport& net, const EndpointAddress& addr) {
  net_ = &net;
  addr_ = addr;
  net.bind(addr, [this](const Envelope& req) { return handle(req); });
}

void CredStoreService::unbind() {
  if (net_) net_->unbind(addr_);
}

Envelope CredStoreService::handle(const Envelope& req) {
  std::int64_t now = net_->now_ms();
  const std::string& me = auth_.identity_name();
  if (auth_.is_auth_message(req)) return auth_.handle(req, now);

  auto session = auth_.verify_request(req, now);
  if (!session) return make_error_reply(req, session.error(), me);

  if (req.message_type == "PROXY-STORE") {
    const Value* pv = req.payload.find("proxy");
    if (!pv) return make_error_reply(req, make_error(Err::Malformed, "missing proxy"), me);
    auto proxy = Chain::from_value(*pv);
    if (!proxy) return make_error_reply(req, proxy.error(), me);
    Entry e{*proxy, req.payload.string_or("tag", ""), ++seq_};
    by_subject_[proxy->root().subject.name].push_back(std::move(e));
    return make_reply(req, "STORED", Value(ValueRecord{}), me);
  }
  if (req.message_type == "PROXY-FETCH") {
    std::string subject = req.payload.string_or("subject", "");
    std::string tag = req.payload.string_or("tag", "");
    auto it = by_subject_.find(subject);
    if (it == by_subject_.end())
      return make_error_reply(req, make_error(Err::NotFound, subject), me);
    // purge expired proxies on access
    auto& entries = it->second;
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [now](const Entry& e) {
                                   return e.proxy.leaf().not_after < now - kClockSkewMs;
                                 }),
                  entries.end());
    if (entries.empty())
      return make_error_reply(req, make_error(Err::AllExpired, subject), me);
    const Entry* best = nullptr;
    for (const Entry& e : entries) {
      if (e.tag != tag) continue;
      if (!best || e.stored_seq > best->stored_seq) best = &e;
    }
    if (!best) return make_error_reply(req, make_error(Err::WrongTag, subject), me);
    ValueRecord out;
    out["proxy"] = best->proxy.to_value();
    return make_reply(req, "PROXY", Value(std::move(out)), me);
  }
  return make_error_reply(req, make_error(Err::Malformed, "unknown message type"), me);
}

}  // namespace grid
