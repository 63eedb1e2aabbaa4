#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scarr/digest.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/prover.hpp"

namespace scarr {

enum class ViolationKind : std::uint8_t {
  Integrity,
  Replay,
  UnknownMeasurement,
  ChainBreak,
  ShadowStackMismatch,
  Underflow,
};

std::string violation_kind_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::uint64_t threadId = 0;
  std::uint64_t reportIndex = 0;
  std::optional<std::uint64_t> measurementOrdinal; // within the report
  std::string detail;
};

// One-line machine-readable rendering:
// VIOLATION kind=<k> thread=<t> report=<i> measurement=<m|-> detail=<text>
std::string render_violation(const Violation& v);

struct Challenge {
  std::vector<std::uint8_t> input; // what the prover should execute on
  std::array<std::uint8_t, 16> nonce{};

  bool operator==(const Challenge&) const = default;
};

struct ShadowStackState {
  std::vector<Edge> stack; // pending call edges, innermost last
};

// Replay one measurement's call/return subset against a thread's shadow
// stack. On success the stack is updated and nullopt returned; on failure
// the stack is untouched and the violation (kind + detail only) returned.
std::optional<Violation> apply_loa(ShadowStackState& shadow,
                                   std::span<const Edge> callRetSubset,
                                   const RetToIndex& retTo);

// Verifies a stream of partial reports against the offline DB: fingerprint,
// per-thread freshness, measurement lookup (C1), checkpoint chaining (C2)
// and call/return consistency (C3).
class VerifierSession {
 public:
  VerifierSession(std::vector<std::uint8_t> key,
                  std::array<std::uint8_t, 16> nonce, const MeasurementsDb& db);

  // nullopt = report accepted and state advanced. On violation the session
  // state is unchanged (the report is rejected as a whole).
  std::optional<Violation> verify_report(const PartialReport& report);

  struct ThreadState {
    std::uint64_t expectedIndex = 0;
    std::optional<std::string> lastCpB;
    ShadowStackState shadow;
    bool ended = false;
  };

  const ThreadState* thread_state(std::uint64_t threadId) const;
  const MeasurementsDb& db() const { return *db_; }
  std::uint64_t reports_accepted() const { return reportsAccepted_; }
  std::uint64_t measurements_accepted() const { return measurementsAccepted_; }
  bool all_stacks_empty() const;
  const std::array<std::uint8_t, 16>& nonce() const { return nonce_; }

 private:
  std::vector<std::uint8_t> key_;
  std::array<std::uint8_t, 16> nonce_;
  const MeasurementsDb* db_;
  std::map<std::uint64_t, ThreadState> threads_;
  std::uint64_t reportsAccepted_ = 0;
  std::uint64_t measurementsAccepted_ = 0;
};

// Fresh challenge (random nonce) plus the session that will verify the
// responses to it.
std::pair<Challenge, VerifierSession> issue_challenge(
    std::vector<std::uint8_t> input, std::vector<std::uint8_t> key,
    const MeasurementsDb& db);

} // namespace scarr
