// Online proxy-credential store: store short-lived proxies under a
// passphrase-equivalent tag, fetch the freshest still-valid one later.

#ifndef GRID_CREDSTORE_HPP_
#define GRID_CREDSTORE_HPP_

#include <map>
#include <memory>
#include <vector>

#include "grid/authproto.hpp"

namespace grid {

class CredStoreService {
 public:
  CredStoreService(std::shared_ptr<KeyStore> keys, TrustStore trust, Chain own_chain);

  void bind(Transport& net, const EndpointAddress& addr);
  void unbind();

  Envelope handle(const Envelope& req);

 private:
  struct Entry {
    Chain proxy;
    std::string tag;
    std::int64_t stored_seq;
  };

  std::shared_ptr<KeyStore> keys_;
  AuthServer auth_;
  Transport* net_ = nullptr;
  EndpointAddress addr_;
  std::map<std::string, std::vector<Entry>> by_subject_;
  std::int64_t seq_ = 0;
};

}  // namespace grid

#endif  // GRID_CREDSTORE_HPP_
