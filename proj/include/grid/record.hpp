// Canonical structured record format.
//
// Every persistent file and every wire payload in this project is one
// Value rendered in a canonical text form: record keys sorted
// lexicographically, one space between tokens, minimal escapes. Two
// semantically equal values always encode to identical bytes, which is
// what makes signatures stable and traces byte-comparable.
//
// Grammar:
//   value  := int | bool | string | bytes | list | record
//   int    := -?[0-9]+
//   bool   := "true" | "false"
//   string := '"' escaped-utf8 '"'          escapes: \" \\ \n \r \t \xHH
//   bytes  := 'x"' lowercase-hex '"'
//   list   := '[' value (' ' value)* ']'    or '[]'
//   record := '{' key '=' value (' ' key '=' value)* '}'   or '{}'
//   key    := [A-Za-z0-9_.:/@-]+

#ifndef GRID_RECORD_HPP_
#define GRID_RECORD_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "grid/errors.hpp"

namespace grid {

using Bytes = std::vector<std::uint8_t>;

class Value;
using ValueList = std::vector<Value>;
using ValueRecord = std::map<std::string, Value>;

class Value {
 public:
  Value() : v_(std::int64_t{0}) {}
  Value(std::int64_t i) : v_(i) {}        // NOLINT implicit
  Value(int i) : v_(std::int64_t{i}) {}   // NOLINT implicit
  Value(bool b) : v_(b) {}                // NOLINT implicit
  Value(std::string s) : v_(std::move(s)) {}  // NOLINT implicit
  Value(const char* s) : v_(std::string(s)) {}  // NOLINT implicit
  Value(Bytes b) : v_(std::move(b)) {}    // NOLINT implicit
  Value(ValueList l) : v_(std::move(l)) {}      // NOLINT implicit
  Value(ValueRecord r) : v_(std::move(r)) {}    // NOLINT implicit

  bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_bytes() const { return std::holds_alternative<Bytes>(v_); }
  bool is_list() const { return std::holds_alternative<ValueList>(v_); }
  bool is_record() const { return std::holds_alternative<ValueRecord>(v_); }

  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }
  const Bytes& as_bytes() const { return std::get<Bytes>(v_); }
  const ValueList& as_list() const { return std::get<ValueList>(v_); }
  ValueList& as_list() { return std::get<ValueList>(v_); }
  const ValueRecord& as_record() const { return std::get<ValueRecord>(v_); }
  ValueRecord& as_record() { return std::get<ValueRecord>(v_); }

  // Record field helpers. has/get never throw on missing keys; the
  // *_or variants supply a default.
  bool has(const std::string& key) const;
  const Value* find(const std::string& key) const;
  std::int64_t int_or(const std::string& key, std::int64_t dflt) const;
  bool bool_or(const std::string& key, bool dflt) const;
  std::string string_or(const std::string& key, const std::string& dflt) const;
  void set(const std::string& key, Value v);

  bool operator==(const Value& o) const { return v_ == o.v_; }
  bool operator!=(const Value& o) const { return !(*this == o); }

 private:
  std::variant<std::int64_t, bool, std::string, Bytes, ValueList, ValueRecord> v_;
};

/// Canonical text rendering. Deterministic for equal values.
std::string encode_value(const Value& v);

/// Parse one value. Fails unless the input is exactly one value
/// (surrounding whitespace tolerated).
Result<Value> decode_value(std::string_view text);

/// Parse one value starting at pos; advances pos past it.
Result<Value> decode_value_at(std::string_view text, std::size_t& pos);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string bytes_to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::string hex_encode(const Bytes& b);
Result<Bytes> hex_decode(std::string_view hex);

}  // namespace grid

#endif  // GRID_RECORD_HPP_
