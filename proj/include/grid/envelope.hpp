// Protocol envelope: the unit every service sends and receives.

#ifndef GRID_ENVELOPE_HPP_
#define GRID_ENVELOPE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "grid/record.hpp"

namespace grid {

// Fixed protocol identifiers.
namespace proto {
inline constexpr const char* kGrrp = "grrp";        // soft-state registration
inline constexpr const char* kInfo = "info";        // enquiry / catalog access
inline constexpr const char* kMgmt = "mgmt";        // management (jobs, reservations)
inline constexpr const char* kData = "data";        // transfer
inline constexpr const char* kAuth = "auth";        // authentication handshake, proxy store
inline constexpr const char* kCoalloc = "coalloc";  // co-reservation service
inline constexpr const char* kCauth = "cauth";      // community authorization
}  // namespace proto

struct Version {
  int major = 1;
  int minor = 0;

  bool operator==(const Version& o) const { return major == o.major && minor == o.minor; }
  bool operator<(const Version& o) const {
    return major != o.major ? major < o.major : minor < o.minor;
  }
};

inline constexpr int kSupportedMajor = 1;

struct Envelope {
  std::string protocol;      // one of proto::*
  Version version{1, 0};
  std::string message_type;  // e.g. "ALLOCATE"
  std::string request_id;    // unique per logical request; retries reuse it
  std::string sender;        // identity name or "anonymous"
  Value payload;             // always a record
  Bytes signature;           // empty = unsigned

  Envelope() : payload(ValueRecord{}) {}
};

/// Canonical bytes with 4-byte big-endian length prefix. Deterministic:
/// equal envelopes encode identically regardless of construction order.
Result<Bytes> encode_envelope(const Envelope& e);

/// Inverse of encode_envelope. Rejects truncated/garbled input and
/// major versions above kSupportedMajor.
Result<Envelope> decode_envelope(const Bytes& bytes);

/// The bytes an envelope signature covers (everything but the signature).
Bytes envelope_signing_bytes(const Envelope& e);

/// Highest version present in both lists; NoCommonVersion otherwise.
Result<Version> negotiate_version(const std::vector<Version>& client_supported,
                                  const std::vector<Version>& server_supported);

bool envelope_equal(const Envelope& a, const Envelope& b);

/// Build a reply that mirrors protocol/version/request_id of `req`.
Envelope make_reply(const Envelope& req, const std::string& message_type,
                    Value payload, const std::string& sender);

/// ERROR reply carrying a structured error (code name, detail, aux,
/// optional failed stage).
Envelope make_error_reply(const Envelope& req, const Error& err,
                          const std::string& sender, const std::string& stage = {});

/// Extract an Error from an ERROR reply.
Error error_from_reply(const Envelope& reply);

bool is_error_reply(const Envelope& reply);

}  // namespace grid

#endif  // GRID_ENVELOPE_HPP_
