#include "grid/record.hpp"

#include <cctype>

namespace grid {

namespace {

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == ':' || c == '/' || c == '@' || c == '-';
}

void append_escaped(std::string& out, const std::string& s) {
  static const char* hexd = "0123456789abcdef";
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          out += "\\x";
          out += hexd[c >> 4];
          out += hexd[c & 0xf];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void encode_into(std::string& out, const Value& v) {
  if (v.is_int()) {
    out += std::to_string(v.as_int());
  } else if (v.is_bool()) {
    out += v.as_bool() ? "true" : "false";
  } else if (v.is_string()) {
    append_escaped(out, v.as_string());
  } else if (v.is_bytes()) {
    out += "x\"";
    out += hex_encode(v.as_bytes());
    out += '"';
  } else if (v.is_list()) {
    out += '[';
    bool first = true;
    for (const auto& item : v.as_list()) {
      if (!first) out += ' ';
      first = false;
      encode_into(out, item);
    }
    out += ']';
  } else {
    out += '{';
    bool first = true;
    for (const auto& [key, val] : v.as_record()) {
      if (!first) out += ' ';
      first = false;
      out += key;  // keys restricted to the bare charset by construction
      out += '=';
      encode_into(out, val);
    }
    out += '}';
  }
}

struct Parser {
  std::string_view in;
  std::size_t pos = 0;

  bool eof() const { return pos >= in.size(); }
  char peek() const { return in[pos]; }

  void skip_ws() {
    while (!eof() && (in[pos] == ' ' || in[pos] == '\n' || in[pos] == '\t' || in[pos] == '\r')) pos++;
  }

  Result<Value> parse_string(bool as_bytes) {
    // opening quote already consumed by caller? No: consume here.
    if (eof() || in[pos] != '"') return make_error(Err::Malformed, "expected quote");
    pos++;
    std::string out;
    while (true) {
      if (eof()) return make_error(Err::Malformed, "unterminated string");
      char c = in[pos++];
      if (c == '"') break;
      if (c == '\\') {
        if (eof()) return make_error(Err::Malformed, "bad escape");
        char e = in[pos++];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 'r': out += '\r'; break;
          case 't': out += '\t'; break;
          case 'x': {
            if (pos + 2 > in.size()) return make_error(Err::Malformed, "bad hex escape");
            auto hv = hex_decode(in.substr(pos, 2));
            if (!hv) return make_error(Err::Malformed, "bad hex escape");
            out += static_cast<char>((*hv)[0]);
            pos += 2;
            break;
          }
          default:
            return make_error(Err::Malformed, "unknown escape");
        }
      } else {
        out += c;
      }
    }
    if (as_bytes) {
      auto hv = hex_decode(out);
      if (!hv) return make_error(Err::Malformed, "bad hex in bytes literal");
      return Value(std::move(*hv));
    }
    return Value(std::move(out));
  }

  Result<Value> parse_value() {
    skip_ws();
    if (eof()) return make_error(Err::Malformed, "empty input");
    char c = peek();
    if (c == '"') return parse_string(false);
    if (c == 'x' && pos + 1 < in.size() && in[pos + 1] == '"') {
      pos++;
      return parse_string(true);
    }
    if (c == 't' || c == 'f') {
      if (in.compare(pos, 4, "true") == 0) {
        pos += 4;
        return Value(true);
      }
      if (in.compare(pos, 5, "false") == 0) {
        pos += 5;
        return Value(false);
      }
      return make_error(Err::Malformed, "bad literal");
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      if (c == '-') pos++;
      if (eof() || !std::isdigit(static_cast<unsigned char>(peek())))
        return make_error(Err::Malformed, "bad integer");
      while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) pos++;
      try {
        return Value(static_cast<std::int64_t>(std::stoll(std::string(in.substr(start, pos - start)))));
      } catch (const std::exception&) {
        return make_error(Err::Malformed, "integer out of range");
      }
    }
    if (c == '[') {
      pos++;
      ValueList list;
      skip_ws();
      if (!eof() && peek() == ']') {
        pos++;
        return Value(std::move(list));
      }
      while (true) {
        auto item = parse_value();
        if (!item) return item;
        list.push_back(std::move(*item));
        skip_ws();
        if (eof()) return make_error(Err::Malformed, "unterminated list");
        if (peek() == ']') {
          pos++;
          return Value(std::move(list));
        }
      }
    }
    if (c == '{') {
      pos++;
      ValueRecord rec;
      skip_ws();
      if (!eof() && peek() == '}') {
        pos++;
        return Value(std::move(rec));
      }
      while (true) {
        skip_ws();
        std::size_t kstart = pos;
        while (!eof() && is_key_char(peek())) pos++;
        if (pos == kstart) return make_error(Err::Malformed, "expected record key");
        std::string key(in.substr(kstart, pos - kstart));
        if (eof() || peek() != '=') return make_error(Err::Malformed, "expected '='");
        pos++;
        auto val = parse_value();
        if (!val) return val;
        rec[key] = std::move(*val);
        skip_ws();
        if (eof()) return make_error(Err::Malformed, "unterminated record");
        if (peek() == '}') {
          pos++;
          return Value(std::move(rec));
        }
      }
    }
    return make_error(Err::Malformed, "unexpected character");
  }
};

}  // namespace

bool Value::has(const std::string& key) const { return find(key) != nullptr; }

const Value* Value::find(const std::string& key) const {
  if (!is_record()) return nullptr;
  auto it = as_record().find(key);
  return it == as_record().end() ? nullptr : &it->second;
}

std::int64_t Value::int_or(const std::string& key, std::int64_t dflt) const {
  const Value* v = find(key);
  return (v && v->is_int()) ? v->as_int() : dflt;
}

bool Value::bool_or(const std::string& key, bool dflt) const {
  const Value* v = find(key);
  return (v && v->is_bool()) ? v->as_bool() : dflt;
}

std::string Value::string_or(const std::string& key, const std::string& dflt) const {
  const Value* v = find(key);
  return (v && v->is_string()) ? v->as_string() : dflt;
}

void Value::set(const std::string& key, Value v) {
  as_record()[key] = std::move(v);
}

std::string encode_value(const Value& v) {
  std::string out;
  encode_into(out, v);
  return out;
}

Result<Value> decode_value(std::string_view text) {
  std::size_t pos = 0;
  auto r = decode_value_at(text, pos);
  if (!r) return r;
  while (pos < text.size()) {
    char c = text[pos];
    if (c != ' ' && c != '\n' && c != '\t' && c != '\r')
      return make_error(Err::Malformed, "trailing garbage");
    pos++;
  }
  return r;
}

Result<Value> decode_value_at(std::string_view text, std::size_t& pos) {
  Parser p{text, pos};
  auto r = p.parse_value();
  if (r) pos = p.pos;
  return r;
}

std::string hex_encode(const Bytes& b) {
  static const char* hexd = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (std::uint8_t c : b) {
    out += hexd[c >> 4];
    out += hexd[c & 0xf];
  }
  return out;
}

Result<Bytes> hex_decode(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) return make_error(Err::Malformed, "odd hex length");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return make_error(Err::Malformed, "bad hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

}  // namespace grid
