#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scarr/cfg.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/prover.hpp"
#include "scarr/verifier.hpp"

namespace scarr {

enum class AttackKind : std::uint8_t {
  CodeInjection,   // splice an edge that is not in the CFG
  RopChain,        // splice a chain of return edges through gadgets
  FunctionReuse,   // redirect a return to a different DB-valid site
  MeasurementDrop, // remove one measurement and re-seal (white box)
  ReportTamper,    // flip a byte in a report body
  ReportReplay,    // duplicate a report
  ReportDrop,      // suppress a report
};

AttackKind attack_kind_from_name(const std::string& name);
std::string attack_kind_name(AttackKind kind);

// The violation class each attack is designed to trigger.
ViolationKind expected_violation(AttackKind kind);

// --- trace-level attacks -----------------------------------------------

// Insert one edge-traversal event at `position`. The edge must not be a
// legal CFG edge and must be significant, otherwise SpecError: hijacking
// along legal edges is not code injection.
std::vector<TraceEvent> inject_new_edge(const Cfg& cfg,
                                        const std::vector<TraceEvent>& trace,
                                        std::size_t position, const Edge& edge);

// Insert a return-oriented chain (>= 2 return edges) at `position`.
std::vector<TraceEvent> inject_rop_chain(const Cfg& cfg,
                                         const std::vector<TraceEvent>& trace,
                                         std::size_t position,
                                         const std::vector<Edge>& gadgets);

// Replace the trace suffix from `position` with attacker-chosen events.
// The result must stay triplet-preserving (every measurement it produces
// exists in the DB and checkpoints still chain), otherwise SpecError: a
// swap that breaks C1 or C2 is a different attack.
std::vector<TraceEvent> reuse_function_return(
    const Cfg& cfg, const MeasurementsDb& db,
    const std::vector<TraceEvent>& trace, std::size_t position,
    const std::vector<TraceEvent>& replacement, std::uint64_t batchLimit = 50000);

// --- report-level attacks ----------------------------------------------

// Remove measurement `ordinal` of thread `threadId` from the stream and
// re-seal the affected report with the prover's own key (the attacker is
// assumed to own the host).
std::vector<PartialReport> drop_measurement(
    const std::vector<PartialReport>& reports, std::uint64_t threadId,
    std::uint64_t ordinal, std::span<const std::uint8_t> key,
    const std::array<std::uint8_t, 16>& nonce, HashAlgo algo);

// Flip one body byte of the report with the given per-thread index.
std::vector<PartialReport> tamper_report(const std::vector<PartialReport>& reports,
                                         std::uint64_t threadId,
                                         std::uint64_t index);

// Send the given report twice.
std::vector<PartialReport> replay_report(const std::vector<PartialReport>& reports,
                                         std::uint64_t threadId,
                                         std::uint64_t index);

// Suppress the given report. SpecError when it is the thread's last one:
// with nothing after it there is no index gap to observe.
std::vector<PartialReport> drop_report(const std::vector<PartialReport>& reports,
                                       std::uint64_t threadId,
                                       std::uint64_t index);

// --- attack spec files ---------------------------------------------------

struct AttackSpec {
  AttackKind kind;
  std::size_t position = 0;          // trace-level kinds
  Edge edge;                         // code_injection
  std::vector<Edge> gadgets;         // rop_chain
  std::vector<TraceEvent> replacement; // function_reuse
  std::uint64_t threadId = 0;        // report-level kinds
  std::uint64_t ordinal = 0;         // measurement ordinal or report index
  std::optional<ViolationKind> expect; // overrides the kind's default
};

AttackSpec parse_attack_spec(const std::string& json_text);
AttackSpec load_attack_spec_file(const std::string& path);

struct AttackRun {
  std::vector<PartialReport> reports;
  std::optional<Violation> observed;
  std::uint64_t reportsAccepted = 0;
};

// Apply the attack to an honest run of `trace` and verify the resulting
// stream, stopping at the first violation.
AttackRun run_attack(const Cfg& cfg, const MeasurementsDb& db,
                     const std::vector<TraceEvent>& trace,
                     const AttackSpec& spec, std::span<const std::uint8_t> key,
                     const std::array<std::uint8_t, 16>& nonce,
                     std::uint64_t batchLimit = 50000);

} // namespace scarr
