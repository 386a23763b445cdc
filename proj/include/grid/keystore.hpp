// Pluggable signing primitive with a keyed-digest reference
// implementation. Secrets live in one KeyStore held by the scenario
// harness; a "verification handle" in a trust store is simply the key
// handle of the authority's key. Long-term keys count unlock events per
// owner, which is the single sign-on measurement point: signing with a
// proxy key never touches a long-term secret.

#ifndef GRID_KEYSTORE_HPP_
#define GRID_KEYSTORE_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "grid/record.hpp"

namespace grid {

class Signer {
 public:
  virtual ~Signer() = default;
  virtual Bytes sign(const Bytes& data, const std::string& key_handle) = 0;
  virtual bool verify(const Bytes& data, const Bytes& signature,
                      const std::string& key_handle) const = 0;
};

class KeyStore : public Signer {
 public:
  /// Create a key and return its handle. `owner` is the identity whose
  /// unlock counter a long-term key charges.
  std::string create_key(const std::string& owner, bool long_term);

  bool has_key(const std::string& key_handle) const;

  Bytes sign(const Bytes& data, const std::string& key_handle) override;
  bool verify(const Bytes& data, const Bytes& signature,
              const std::string& key_handle) const override;

  std::int64_t unlock_count(const std::string& owner) const;
  std::int64_t total_unlocks() const;

  Value to_value() const;
  static Result<std::shared_ptr<KeyStore>> from_value(const Value& v);

 private:
  struct Key {
    Bytes secret;
    std::string owner;
    bool long_term = false;
  };
  Bytes digest(const Bytes& secret, const Bytes& data) const;

  std::map<std::string, Key> keys_;
  std::map<std::string, std::int64_t> unlocks_;
  std::int64_t counter_ = 0;
};

}  // namespace grid

#endif  // GRID_KEYSTORE_HPP_
