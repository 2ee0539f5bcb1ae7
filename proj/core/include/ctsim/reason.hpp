#pragma once

#include <optional>
#include <string_view>

namespace ctsim {

/// Machine-readable rejection codes shared by transaction, block and
/// network-level checks. The string forms appear in logs and reports.
enum class Reason {
  Ok,
  Malformed,
  BadIndex,
  BadTxid,
  BadSignature,
  DuplicateTx,
  DuplicateToken,
  DuplicateNonce,
  UnknownIssuer,
  IssuerMismatch,
  AudienceMismatch,
  UnknownAudience,
  BadToken,
  UnknownToken,
  UnknownRater,
  NotParticipant,
  BadLabel,
  DuplicateFeedback,
  DuplicateCsp,
  WeightRange,
  StakeRange,
  BadLink,
  BadTxRoot,
  Timestamp,
  BadTarget,
  UnknownGenerator,
  PrfMismatch,
  NotEligible,
  BadGenesis,
  FutureTimestamp,
};

std::string_view reason_name(Reason r);
std::optional<Reason> reason_from_name(std::string_view name);

/// Failures that may clear up once more of the chain arrives (a token or
/// registration not seen yet). Mempools keep such transactions around.
constexpr bool is_pending_reason(Reason r) {
  return r == Reason::UnknownToken || r == Reason::UnknownIssuer || r == Reason::UnknownRater ||
         r == Reason::UnknownAudience;
}

}  // namespace ctsim
