// Error codes and a small result type shared by every layer.

#ifndef GRID_ERRORS_HPP_
#define GRID_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace grid {

enum class Err {
  // wire
  Malformed,
  UnsupportedVersion,
  NoCommonVersion,
  UnencodableValue,
  Timeout,
  Unreachable,
  // connectivity
  NotAnAuthority,
  UntrustedRoot,
  Expired,
  BadSignature,
  PeerMismatch,
  RightsEscalation,
  ChainTooDeep,
  ParentExpired,
  NoMapping,
  NotFound,
  WrongTag,
  AllExpired,
  // policy
  UnknownAttribute,
  Denied,
  // fabric
  UnknownTask,
  AlreadyTerminal,
  NoSpace,
  NegativeOffset,
  Conflict,
  UnknownReservation,
  UnknownTable,
  // resource protocols
  AuthFailed,
  TtlOutOfRange,
  StagingFailed,
  ResourceSaturated,
  UnknownJob,
  NotOwner,
  SourceDenied,
  DestDenied,
  PartialFailure,
  // collective
  UnknownView,
  LegConflict,
  LegUnreachable,
  Aborted,
  AbortedTwice,
  NotMember,
  NothingGranted,
  UnknownLogical,
  SizeMismatch,
  // harness / cli
  ValidationError,
  Deadline,
  Starvation,
  UsageError,
};

const char* err_name(Err e);
bool err_from_name(const std::string& name, Err& out);

struct Error {
  Err code;
  std::string detail;
  // Extra machine-readable datum: chain link index, failing leg,
  // earliest-fit time, chunks completed -- depending on the code.
  std::int64_t aux = -1;

  std::string to_string() const;
};

inline Error make_error(Err code, std::string detail = {}, std::int64_t aux = -1) {
  return Error{code, std::move(detail), aux};
}

/// Minimal expected-like result. GCC 11 has no std::expected.
template <class T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT implicit
  Result(Error e) : v_(std::move(e)) {}      // NOLINT implicit

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() {
    if (!ok()) throw std::runtime_error("Result::value on error: " + error().to_string());
    return std::get<T>(v_);
  }
  const T& value() const {
    if (!ok()) throw std::runtime_error("Result::value on error: " + error().to_string());
    return std::get<T>(v_);
  }
  const Error& error() const { return std::get<Error>(v_); }
  Err code() const { return error().code; }

  T& operator*() { return value(); }
  const T& operator*() const { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, Error> v_;
};

struct Unit {};
using Status = Result<Unit>;

inline Status ok_status() { return Status(Unit{}); }

}  // namespace grid

#endif  // GRID_ERRORS_HPP_
