#include "scarr/verifier.hpp"

#include <sstream>

#include "scarr/errors.hpp"

namespace scarr {

std::string violation_kind_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Integrity: return "integrity";
    case ViolationKind::Replay: return "replay";
    case ViolationKind::UnknownMeasurement: return "unknown_measurement";
    case ViolationKind::ChainBreak: return "chain_break";
    case ViolationKind::ShadowStackMismatch: return "shadow_stack_mismatch";
    case ViolationKind::Underflow: return "underflow";
  }
  throw SpecError("bad violation kind value");
}

std::string render_violation(const Violation& v) {
  std::ostringstream out;
  out << "VIOLATION kind=" << violation_kind_name(v.kind)
      << " thread=" << v.threadId << " report=" << v.reportIndex
      << " measurement=";
  if (v.measurementOrdinal) {
    out << *v.measurementOrdinal;
  } else {
    out << '-';
  }
  out << " detail=" << v.detail;
  return out.str();
}

std::optional<Violation> apply_loa(ShadowStackState& shadow,
                                   std::span<const Edge> callRetSubset,
                                   const RetToIndex& retTo) {
  ShadowStackState next = shadow;
  for (const Edge& e : callRetSubset) {
    if (e.kind == EdgeKind::Call) {
      next.stack.push_back(e);
      continue;
    }
    if (e.kind != EdgeKind::Return) {
      return Violation{ViolationKind::ShadowStackMismatch, 0, 0, std::nullopt,
                       "non call/return edge in stored subset"};
    }
    if (next.stack.empty()) {
      return Violation{ViolationKind::Underflow, 0, 0, std::nullopt,
                       "return " + e.src + "->" + e.dst +
                           " with empty shadow stack"};
    }
    const Edge& top = next.stack.back();
    auto it = retTo.find({e.src, e.dst});
    bool matches = false;
    if (it != retTo.end()) {
      for (const Edge& call : it->second) {
        if (call == top) {
          matches = true;
          break;
        }
      }
    }
    if (!matches) {
      return Violation{ViolationKind::ShadowStackMismatch, 0, 0, std::nullopt,
                       "return " + e.src + "->" + e.dst +
                           " does not answer pending call " + top.src + "->" +
                           top.dst};
    }
    next.stack.pop_back();
  }
  shadow = std::move(next);
  return std::nullopt;
}

VerifierSession::VerifierSession(std::vector<std::uint8_t> key,
                                 std::array<std::uint8_t, 16> nonce,
                                 const MeasurementsDb& db)
    : key_(std::move(key)), nonce_(nonce), db_(&db) {
  if (key_.empty()) throw SpecError("verifier key must not be empty");
}

std::optional<Violation> VerifierSession::verify_report(
    const PartialReport& report) {
  const std::uint64_t tid = report.threadId;

  if (!verify_fingerprint(key_, nonce_, report, db_->algo())) {
    return Violation{ViolationKind::Integrity, tid, report.index, std::nullopt,
                     "fingerprint does not authenticate report body"};
  }

  ThreadState st = threads_.count(tid) ? threads_.at(tid) : ThreadState{};

  if (report.index != st.expectedIndex) {
    return Violation{ViolationKind::Replay, tid, report.index, std::nullopt,
                     "expected report index " + std::to_string(st.expectedIndex) +
                         ", got " + std::to_string(report.index)};
  }

  for (std::size_t i = 0; i < report.measurements.size(); ++i) {
    const OnlineMeasurement& m = report.measurements[i];
    auto fail = [&](ViolationKind kind, const std::string& detail) {
      return Violation{kind, tid, report.index, i, detail};
    };

    // C1: the triplet must exist in the offline DB.
    const OfflineMeasurement* offline =
        db_->lookup(MeasurementKey{m.cpA, m.cpB, m.loaHash});
    if (!offline) {
      return fail(ViolationKind::UnknownMeasurement,
                  "no DB entry for (" + m.cpA + ", " + m.cpB + ", " +
                      to_hex(m.loaHash) + ")");
    }

    // C2: checkpoints chain. The first measurement of a thread must start
    // where threads start; afterwards each fragment starts where the
    // previous one ended.
    if (!st.lastCpB) {
      if (db_->checkpoint_kind(m.cpA) != CheckpointKind::ThreadBegin) {
        return fail(ViolationKind::ChainBreak,
                    "thread's first fragment starts at " + m.cpA +
                        ", which is not a thread begin checkpoint");
      }
    } else if (*st.lastCpB != m.cpA) {
      return fail(ViolationKind::ChainBreak,
                  "fragment starts at " + m.cpA + " but previous ended at " +
                      *st.lastCpB);
    }

    // C3: calls and returns must respect the shadow stack.
    if (auto v = apply_loa(st.shadow, offline->callRetSubset, db_->ret_to())) {
      v->threadId = tid;
      v->reportIndex = report.index;
      v->measurementOrdinal = i;
      return v;
    }

    if (db_->checkpoint_kind(m.cpB) == CheckpointKind::ThreadEnd) {
      if (!st.shadow.stack.empty()) {
        const Edge& top = st.shadow.stack.back();
        return fail(ViolationKind::ShadowStackMismatch,
                    "thread ends with " +
                        std::to_string(st.shadow.stack.size()) +
                        " unanswered call(s), innermost " + top.src + "->" +
                        top.dst);
      }
      st.ended = true;
    }

    st.lastCpB = m.cpB;
  }

  st.expectedIndex = report.index + 1;
  threads_[tid] = std::move(st);
  ++reportsAccepted_;
  measurementsAccepted_ += report.measurements.size();
  return std::nullopt;
}

const VerifierSession::ThreadState* VerifierSession::thread_state(
    std::uint64_t threadId) const {
  auto it = threads_.find(threadId);
  return it == threads_.end() ? nullptr : &it->second;
}

bool VerifierSession::all_stacks_empty() const {
  for (const auto& [tid, st] : threads_) {
    if (!st.shadow.stack.empty()) return false;
  }
  return true;
}

std::pair<Challenge, VerifierSession> issue_challenge(
    std::vector<std::uint8_t> input, std::vector<std::uint8_t> key,
    const MeasurementsDb& db) {
  Challenge ch;
  ch.input = std::move(input);
  ch.nonce = random_nonce();
  VerifierSession session(std::move(key), ch.nonce, db);
  return {std::move(ch), std::move(session)};
}

} // namespace scarr
