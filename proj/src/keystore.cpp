#include "grid/keystore.hpp"

namespace grid {

namespace {

// FNV-1a, two independent 64-bit lanes keyed by the secret. Not
// cryptography; the artifact needs tamper sensitivity, not strength.
void fnv_mix(std::uint64_t& h, std::uint8_t byte, std::uint64_t prime) {
  h ^= byte;
  h *= prime;
}

}  // namespace

std::string KeyStore::create_key(const std::string& owner, bool long_term) {
  std::string handle = "k" + std::to_string(++counter_) + ":" + owner;
  Key key;
  key.owner = owner;
  key.long_term = long_term;
  // Derived deterministically from (counter, owner) so that a scenario
  // replay produces identical signatures.
  std::string seed = handle + "|secret";
  key.secret = to_bytes(seed);
  keys_[handle] = std::move(key);
  return handle;
}

bool KeyStore::has_key(const std::string& key_handle) const {
  return keys_.count(key_handle) != 0;
}

Bytes KeyStore::digest(const Bytes& secret, const Bytes& data) const {
  std::uint64_t h1 = 0xcbf29ce484222325ULL;
  std::uint64_t h2 = 0x9e3779b97f4a7c15ULL;
  auto feed = [&](const Bytes& b) {
    for (std::uint8_t c : b) {
      fnv_mix(h1, c, 0x100000001b3ULL);
      fnv_mix(h2, c, 0x9e3779b97f4a7c55ULL);
      h2 = (h2 << 7) | (h2 >> 57);
    }
  };
  feed(secret);
  feed(data);
  feed(secret);
  Bytes out(16);
  for (int i = 0; i < 8; i++) out[i] = static_cast<std::uint8_t>(h1 >> (8 * i));
  for (int i = 0; i < 8; i++) out[8 + i] = static_cast<std::uint8_t>(h2 >> (8 * i));
  return out;
}

Bytes KeyStore::sign(const Bytes& data, const std::string& key_handle) {
  auto it = keys_.find(key_handle);
  if (it == keys_.end()) throw std::runtime_error("unknown key handle: " + key_handle);
  if (it->second.long_term) unlocks_[it->second.owner]++;
  return digest(it->second.secret, data);
}

bool KeyStore::verify(const Bytes& data, const Bytes& signature,
                      const std::string& key_handle) const {
  auto it = keys_.find(key_handle);
  if (it == keys_.end()) return false;
  return digest(it->second.secret, data) == signature;
}

std::int64_t KeyStore::unlock_count(const std::string& owner) const {
  auto it = unlocks_.find(owner);
  return it == unlocks_.end() ? 0 : it->second;
}

std::int64_t KeyStore::total_unlocks() const {
  std::int64_t n = 0;
  for (const auto& [_, c] : unlocks_) n += c;
  return n;
}

Value KeyStore::to_value() const {
  ValueList keys;
  for (const auto& [handle, key] : keys_) {
    ValueRecord r;
    r["handle"] = handle;
    r["owner"] = key.owner;
    r["long_term"] = key.long_term;
    r["secret"] = key.secret;
    keys.push_back(Value(std::move(r)));
  }
  ValueRecord top;
  top["counter"] = counter_;
  top["keys"] = std::move(keys);
  return Value(std::move(top));
}

Result<std::shared_ptr<KeyStore>> KeyStore::from_value(const Value& v) {
  if (!v.is_record() || !v.has("keys") || !v.find("keys")->is_list())
    return make_error(Err::ValidationError, "keystore: bad structure");
  auto ks = std::make_shared<KeyStore>();
  ks->counter_ = v.int_or("counter", 0);
  for (const Value& kv : v.find("keys")->as_list()) {
    if (!kv.is_record()) return make_error(Err::ValidationError, "keystore: bad key entry");
    Key key;
    key.owner = kv.string_or("owner", "");
    key.long_term = kv.bool_or("long_term", false);
    const Value* secret = kv.find("secret");
    if (!secret || !secret->is_bytes())
      return make_error(Err::ValidationError, "keystore: missing secret");
    key.secret = secret->as_bytes();
    ks->keys_[kv.string_or("handle", "")] = std::move(key);
  }
  return ks;
}

}  // namespace grid
