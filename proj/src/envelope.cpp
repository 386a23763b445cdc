#include "grid/envelope.hpp"

#include <algorithm>

namespace grid {

namespace {

Value envelope_to_value(const Envelope& e, bool with_signature) {
  ValueRecord rec;
  rec["protocol"] = e.protocol;
  rec["version"] = ValueList{Value(std::int64_t{e.version.major}), Value(std::int64_t{e.version.minor})};
  rec["type"] = e.message_type;
  rec["request_id"] = e.request_id;
  rec["sender"] = e.sender;
  rec["payload"] = e.payload;
  if (with_signature && !e.signature.empty()) rec["signature"] = e.signature;
  return Value(std::move(rec));
}

}  // namespace

Result<Bytes> encode_envelope(const Envelope& e) {
  if (!e.payload.is_record())
    return make_error(Err::UnencodableValue, "payload must be a record");
  if (e.request_id.empty())
    return make_error(Err::UnencodableValue, "request_id must be non-empty");
  std::string body = encode_value(envelope_to_value(e, true));
  Bytes out;
  out.reserve(body.size() + 4);
  std::uint32_t n = static_cast<std::uint32_t>(body.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Result<Envelope> decode_envelope(const Bytes& bytes) {
  if (bytes.size() < 4) return make_error(Err::Malformed, "short frame");
  std::uint32_t n = (static_cast<std::uint32_t>(bytes[0]) << 24) |
                    (static_cast<std::uint32_t>(bytes[1]) << 16) |
                    (static_cast<std::uint32_t>(bytes[2]) << 8) |
                    static_cast<std::uint32_t>(bytes[3]);
  if (bytes.size() != n + 4) return make_error(Err::Malformed, "frame length mismatch");
  std::string_view body(reinterpret_cast<const char*>(bytes.data()) + 4, n);
  auto v = decode_value(body);
  if (!v) return v.error();
  if (!v->is_record()) return make_error(Err::Malformed, "envelope not a record");

  Envelope e;
  const Value* version = v->find("version");
  if (!version || !version->is_list() || version->as_list().size() != 2 ||
      !version->as_list()[0].is_int() || !version->as_list()[1].is_int())
    return make_error(Err::Malformed, "bad version field");
  e.version.major = static_cast<int>(version->as_list()[0].as_int());
  e.version.minor = static_cast<int>(version->as_list()[1].as_int());
  if (e.version.major > kSupportedMajor)
    return make_error(Err::UnsupportedVersion,
                      "major " + std::to_string(e.version.major));

  const Value* payload = v->find("payload");
  if (!payload || !payload->is_record())
    return make_error(Err::Malformed, "bad payload field");
  for (const char* key : {"protocol", "type", "request_id", "sender"}) {
    const Value* f = v->find(key);
    if (!f || !f->is_string()) return make_error(Err::Malformed, std::string("bad field ") + key);
  }
  e.protocol = v->find("protocol")->as_string();
  e.message_type = v->find("type")->as_string();
  e.request_id = v->find("request_id")->as_string();
  e.sender = v->find("sender")->as_string();
  e.payload = *payload;
  if (e.request_id.empty()) return make_error(Err::Malformed, "empty request_id");
  if (const Value* sig = v->find("signature")) {
    if (!sig->is_bytes()) return make_error(Err::Malformed, "bad signature field");
    e.signature = sig->as_bytes();
  }
  return e;
}

Bytes envelope_signing_bytes(const Envelope& e) {
  return to_bytes(encode_value(envelope_to_value(e, false)));
}

Result<Version> negotiate_version(const std::vector<Version>& client_supported,
                                  const std::vector<Version>& server_supported) {
  bool found = false;
  Version best;
  for (const Version& c : client_supported) {
    for (const Version& s : server_supported) {
      if (c == s && (!found || best < c)) {
        best = c;
        found = true;
      }
    }
  }
  if (!found) return make_error(Err::NoCommonVersion);
  return best;
}

bool envelope_equal(const Envelope& a, const Envelope& b) {
  return a.protocol == b.protocol && a.version == b.version &&
         a.message_type == b.message_type && a.request_id == b.request_id &&
         a.sender == b.sender && a.payload == b.payload && a.signature == b.signature;
}

Envelope make_reply(const Envelope& req, const std::string& message_type,
                    Value payload, const std::string& sender) {
  Envelope r;
  r.protocol = req.protocol;
  r.version = req.version;
  r.message_type = message_type;
  r.request_id = req.request_id;
  r.sender = sender;
  r.payload = std::move(payload);
  return r;
}

Envelope make_error_reply(const Envelope& req, const Error& err,
                          const std::string& sender, const std::string& stage) {
  ValueRecord p;
  p["code"] = std::string(err_name(err.code));
  p["detail"] = err.detail;
  p["aux"] = err.aux;
  if (!stage.empty()) p["stage"] = stage;
  return make_reply(req, "ERROR", Value(std::move(p)), sender);
}

Error error_from_reply(const Envelope& reply) {
  Err code = Err::Malformed;
  err_from_name(reply.payload.string_or("code", ""), code);
  Error e{code, reply.payload.string_or("detail", ""), reply.payload.int_or("aux", -1)};
  std::string stage = reply.payload.string_or("stage", "");
  if (!stage.empty()) e.detail = stage + ": " + e.detail;
  return e;
}

bool is_error_reply(const Envelope& reply) { return reply.message_type == "ERROR"; }

}  // namespace grid
