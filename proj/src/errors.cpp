#include "grid/errors.hpp"

#include <array>
#include <cstring>

namespace grid {

namespace {

struct NameEntry {
  Err code;
  const char* name;
};

constexpr std::array<NameEntry, 49> kNames{{
    {Err::Malformed, "Malformed"},
    {Err::UnsupportedVersion, "UnsupportedVersion"},
    {Err::NoCommonVersion, "NoCommonVersion"},
    {Err::UnencodableValue, "UnencodableValue"},
    {Err::Timeout, "Timeout"},
    {Err::Unreachable, "Unreachable"},
    {Err::NotAnAuthority, "NotAnAuthority"},
    {Err::UntrustedRoot, "UntrustedRoot"},
    {Err::Expired, "Expired"},
    {Err::BadSignature, "BadSignature"},
    {Err::PeerMismatch, "PeerMismatch"},
    {Err::RightsEscalation, "RightsEscalation"},
    {Err::ChainTooDeep, "ChainTooDeep"},
    {Err::ParentExpired, "ParentExpired"},
    {Err::NoMapping, "NoMapping"},
    {Err::NotFound, "NotFound"},
    {Err::WrongTag, "WrongTag"},
    {Err::AllExpired, "AllExpired"},
    {Err::UnknownAttribute, "UnknownAttribute"},
    {Err::Denied, "Denied"},
    {Err::UnknownTask, "UnknownTask"},
    {Err::AlreadyTerminal, "AlreadyTerminal"},
    {Err::NoSpace, "NoSpace"},
    {Err::NegativeOffset, "NegativeOffset"},
    {Err::Conflict, "Conflict"},
    {Err::UnknownReservation, "UnknownReservation"},
    {Err::UnknownTable, "UnknownTable"},
    {Err::AuthFailed, "AuthFailed"},
    {Err::TtlOutOfRange, "TtlOutOfRange"},
    {Err::StagingFailed, "StagingFailed"},
    {Err::ResourceSaturated, "ResourceSaturated"},
    {Err::UnknownJob, "UnknownJob"},
    {Err::NotOwner, "NotOwner"},
    {Err::SourceDenied, "SourceDenied"},
    {Err::DestDenied, "DestDenied"},
    {Err::PartialFailure, "PartialFailure"},
    {Err::UnknownView, "UnknownView"},
    {Err::LegConflict, "LegConflict"},
    {Err::LegUnreachable, "LegUnreachable"},
    {Err::Aborted, "Aborted"},
    {Err::AbortedTwice, "AbortedTwice"},
    {Err::NotMember, "NotMember"},
    {Err::NothingGranted, "NothingGranted"},
    {Err::UnknownLogical, "UnknownLogical"},
    {Err::SizeMismatch, "SizeMismatch"},
    {Err::ValidationError, "ValidationError"},
    {Err::Deadline, "Deadline"},
    {Err::Starvation, "Starvation"},
    {Err::UsageError, "UsageError"},
}};

}  // namespace

const char* err_name(Err e) {
  for (const auto& entry : kNames) {
    if (entry.code == e) return entry.name;
  }
  return "Unknown";
}

bool err_from_name(const std::string& name, Err& out) {
  for (const auto& entry : kNames) {
    if (name == entry.name) {
      out = entry.code;
      return true;
    }
  }
  return false;
}

std::string Error::to_string() const {
  std::string s = err_name(code);
  if (!detail.empty()) {
    s += ": ";
    s += detail;
  }
  if (aux >= 0) {
    s += " [";
    s += std::to_string(aux);
    s += "]";
  }
  return s;
}

}  // namespace grid
