#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scarr/cfg.hpp"
#include "scarr/digest.hpp"

namespace scarr {

struct TraceEvent {
  enum class Type : std::uint8_t { EdgeTraversal, CheckpointCross };

  std::uint64_t threadId = 0;
  Type type = Type::EdgeTraversal;
  Edge edge;        // valid when type == EdgeTraversal
  std::string node; // valid when type == CheckpointCross

  static TraceEvent edge_traversal(std::uint64_t tid, Edge e) {
    return TraceEvent{tid, Type::EdgeTraversal, std::move(e), {}};
  }
  static TraceEvent checkpoint_cross(std::uint64_t tid, std::string n) {
    return TraceEvent{tid, Type::CheckpointCross, {}, std::move(n)};
  }

  bool operator==(const TraceEvent&) const = default;
};

// One attested fragment: checkpoint pair plus the hash of the list of
// actions observed between them.
struct OnlineMeasurement {
  std::string cpA;
  std::string cpB;
  Digest loaHash{};

  bool operator==(const OnlineMeasurement&) const = default;
};

struct PartialReport {
  std::uint64_t index = 0; // per-thread report counter, starts at 0
  std::uint64_t threadId = 0;
  std::vector<OnlineMeasurement> measurements;
  Digest fingerprint{};

  bool operator==(const PartialReport&) const = default;
};

// Canonical byte serialization of a report's authenticated body (thread id
// plus measurements). The fingerprint is keyed over exactly these bytes,
// the challenge nonce, and the report index.
std::vector<std::uint8_t> serialize_report_body(const PartialReport& report);
Digest report_fingerprint(std::span<const std::uint8_t> key,
                          const std::array<std::uint8_t, 16>& nonce,
                          const PartialReport& report, HashAlgo algo);
bool verify_fingerprint(std::span<const std::uint8_t> key,
                        const std::array<std::uint8_t, 16>& nonce,
                        const PartialReport& report, HashAlgo algo);

struct ProverConfig {
  std::vector<std::uint8_t> key;
  std::array<std::uint8_t, 16> nonce{};
  std::uint64_t batchLimit = 50000; // measurements per partial report
  HashAlgo algo = HashAlgo::Blake2b256;
};

// Accumulates trace events into measurements and seals them into
// authenticated partial reports, independently per thread.
class ProverSession {
 public:
  explicit ProverSession(ProverConfig config);
  ProverSession(ProverConfig config,
                std::map<std::string, CheckpointKind> checkpoints);

  // Feed one event; returns any report sealed by this event (a checkpoint
  // cross that fills the batch, or a thread-end cross).
  std::vector<PartialReport> record_event(const TraceEvent& event);

  // Seal whatever the thread has accumulated, even mid-batch.
  std::optional<PartialReport> seal_report(std::uint64_t threadId);
  std::vector<PartialReport> seal_all();

  bool has_open_fragment(std::uint64_t threadId) const;
  std::uint64_t measurement_count() const { return measurementsTotal_; }

 private:
  struct ThreadState {
    bool open = false;            // a fragment is in progress
    std::string cpA;              // fragment start, valid when open
    Loa loa;                      // significant edges since cpA
    std::vector<OnlineMeasurement> pending;
    std::uint64_t nextIndex = 0;
  };

  PartialReport seal_locked(std::uint64_t threadId, ThreadState& st);

  ProverConfig config_;
  std::map<std::string, CheckpointKind> checkpoints_;
  bool validateCheckpoints_ = false;
  std::map<std::uint64_t, ThreadState> threads_;
  std::uint64_t measurementsTotal_ = 0;
};

// Parse the line trace format: "T <tid> E <src> <dst> <kind>" for edge
// traversals, "T <tid> C <node>" for checkpoint crossings. '#' starts a
// comment; blank lines are skipped.
std::vector<TraceEvent> parse_trace(std::istream& in);
std::vector<TraceEvent> parse_trace_text(const std::string& text);
std::vector<TraceEvent> load_trace_file(const std::string& path);
std::string trace_to_text(const std::vector<TraceEvent>& events);

struct ReplaySummary {
  std::uint64_t events = 0;
  std::uint64_t measurements = 0;
  std::uint64_t reports = 0;
};

// Drive a full trace through a session, invoking the sink for every sealed
// report (in order), then flush every thread's remainder.
ReplaySummary replay_trace(ProverSession& session,
                           const std::vector<TraceEvent>& events,
                           const std::function<void(const PartialReport&)>& sink);

} // namespace scarr
