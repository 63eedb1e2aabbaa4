#include "scarr/prover.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "scarr/errors.hpp"

namespace scarr {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

} // namespace

std::vector<std::uint8_t> serialize_report_body(const PartialReport& report) {
  std::vector<std::uint8_t> out;
  put_u64(out, report.threadId);
  put_u32(out, static_cast<std::uint32_t>(report.measurements.size()));
  for (const auto& m : report.measurements) {
    put_str(out, m.cpA);
    put_str(out, m.cpB);
    out.insert(out.end(), m.loaHash.begin(), m.loaHash.end());
  }
  return out;
}

Digest report_fingerprint(std::span<const std::uint8_t> key,
                          const std::array<std::uint8_t, 16>& nonce,
                          const PartialReport& report, HashAlgo algo) {
  std::vector<std::uint8_t> msg = serialize_report_body(report);
  msg.insert(msg.end(), nonce.begin(), nonce.end());
  put_u64(msg, report.index);
  return hmac(key, msg, algo);
}

bool verify_fingerprint(std::span<const std::uint8_t> key,
                        const std::array<std::uint8_t, 16>& nonce,
                        const PartialReport& report, HashAlgo algo) {
  return digest_equal(report_fingerprint(key, nonce, report, algo),
                      report.fingerprint);
}

ProverSession::ProverSession(ProverConfig config) : config_(std::move(config)) {
  if (config_.batchLimit == 0) throw SpecError("batch limit must be positive");
  if (config_.key.empty()) throw SpecError("prover key must not be empty");
}

ProverSession::ProverSession(ProverConfig config,
                             std::map<std::string, CheckpointKind> checkpoints)
    : ProverSession(std::move(config)) {
  checkpoints_ = std::move(checkpoints);
  validateCheckpoints_ = true;
}

std::vector<PartialReport> ProverSession::record_event(const TraceEvent& event) {
  std::vector<PartialReport> sealed;
  ThreadState& st = threads_[event.threadId];

  if (event.type == TraceEvent::Type::EdgeTraversal) {
    if (!edge_kind_significant(event.edge.kind)) return sealed;
    if (!st.open) {
      throw SpecError("significant edge for thread " +
                      std::to_string(event.threadId) +
                      " before its first checkpoint cross");
    }
    st.loa.edges.push_back(event.edge);
    return sealed;
  }

  // Checkpoint cross.
  CheckpointKind kind = CheckpointKind::None;
  if (validateCheckpoints_) {
    auto it = checkpoints_.find(event.node);
    if (it == checkpoints_.end() || it->second == CheckpointKind::None) {
      throw SpecError("cross event at non-checkpoint node: " + event.node);
    }
    kind = it->second;
  }

  if (!st.open) {
    st.open = true;
    st.cpA = event.node;
    st.loa.edges.clear();
    return sealed;
  }

  OnlineMeasurement m;
  m.cpA = st.cpA;
  m.cpB = event.node;
  m.loaHash = hash_loa(st.loa, config_.algo);
  st.pending.push_back(std::move(m));
  ++measurementsTotal_;
  st.cpA = event.node;
  st.loa.edges.clear();

  bool threadEnded = kind == CheckpointKind::ThreadEnd;
  if (threadEnded) st.open = false;
  if (threadEnded || st.pending.size() >= config_.batchLimit) {
    sealed.push_back(seal_locked(event.threadId, st));
  }
  return sealed;
}

std::optional<PartialReport> ProverSession::seal_report(std::uint64_t threadId) {
  auto it = threads_.find(threadId);
  if (it == threads_.end() || it->second.pending.empty()) return std::nullopt;
  return seal_locked(threadId, it->second);
}

std::vector<PartialReport> ProverSession::seal_all() {
  std::vector<PartialReport> out;
  for (auto& [tid, st] : threads_) {
    if (!st.pending.empty()) out.push_back(seal_locked(tid, st));
  }
  return out;
}

bool ProverSession::has_open_fragment(std::uint64_t threadId) const {
  auto it = threads_.find(threadId);
  return it != threads_.end() && it->second.open;
}

PartialReport ProverSession::seal_locked(std::uint64_t threadId,
                                         ThreadState& st) {
  PartialReport report;
  report.index = st.nextIndex++;
  report.threadId = threadId;
  report.measurements = std::move(st.pending);
  st.pending.clear();
  report.fingerprint =
      report_fingerprint(config_.key, config_.nonce, report, config_.algo);
  return report;
}

// ---------------------------------------------------------------------------
// Trace text format

std::vector<TraceEvent> parse_trace(std::istream& in) {
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue; // blank
    auto bad = [&](const std::string& why) {
      throw ValidationError("trace line " + std::to_string(lineno) + ": " + why);
    };
    if (tag != "T") bad("expected 'T'");
    std::uint64_t tid;
    std::string op;
    if (!(ls >> tid >> op)) bad("expected thread id and op");
    if (op == "E") {
      std::string src, dst, kind;
      if (!(ls >> src >> dst >> kind)) bad("expected src, dst, kind");
      events.push_back(TraceEvent::edge_traversal(
          tid, Edge{src, dst, edge_kind_from_name(kind)}));
    } else if (op == "C") {
      std::string node;
      if (!(ls >> node)) bad("expected node label");
      events.push_back(TraceEvent::checkpoint_cross(tid, node));
    } else {
      bad("unknown op '" + op + "'");
    }
    std::string extra;
    if (ls >> extra) bad("trailing tokens");
  }
  return events;
}

std::vector<TraceEvent> parse_trace_text(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

std::vector<TraceEvent> load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file: " + path);
  return parse_trace(in);
}

std::string trace_to_text(const std::vector<TraceEvent>& events) {
  std::ostringstream out;
  for (const auto& ev : events) {
    if (ev.type == TraceEvent::Type::EdgeTraversal) {
      out << "T " << ev.threadId << " E " << ev.edge.src << ' ' << ev.edge.dst
          << ' ' << edge_kind_name(ev.edge.kind) << '\n';
    } else {
      out << "T " << ev.threadId << " C " << ev.node << '\n';
    }
  }
  return out.str();
}

ReplaySummary replay_trace(
    ProverSession& session, const std::vector<TraceEvent>& events,
    const std::function<void(const PartialReport&)>& sink) {
  ReplaySummary summary;
  for (const auto& ev : events) {
    ++summary.events;
    for (auto& report : session.record_event(ev)) {
      summary.measurements += report.measurements.size();
      ++summary.reports;
      if (sink) sink(report);
    }
  }
  for (auto& report : session.seal_all()) {
    summary.measurements += report.measurements.size();
    ++summary.reports;
    if (sink) sink(report);
  }
  return summary;
}

} // namespace scarr
