#include "scarr/attack.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scarr/errors.hpp"

namespace scarr {

using json = nlohmann::json;

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "code_injection") return AttackKind::CodeInjection;
  if (name == "rop_chain") return AttackKind::RopChain;
  if (name == "function_reuse") return AttackKind::FunctionReuse;
  if (name == "measurement_drop") return AttackKind::MeasurementDrop;
  if (name == "report_tamper") return AttackKind::ReportTamper;
  if (name == "report_replay") return AttackKind::ReportReplay;
  if (name == "report_drop") return AttackKind::ReportDrop;
  throw ValidationError("unknown attack kind: " + name);
}

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::CodeInjection: return "code_injection";
    case AttackKind::RopChain: return "rop_chain";
    case AttackKind::FunctionReuse: return "function_reuse";
    case AttackKind::MeasurementDrop: return "measurement_drop";
    case AttackKind::ReportTamper: return "report_tamper";
    case AttackKind::ReportReplay: return "report_replay";
    case AttackKind::ReportDrop: return "report_drop";
  }
  throw SpecError("bad attack kind value");
}

ViolationKind expected_violation(AttackKind kind) {
  switch (kind) {
    case AttackKind::CodeInjection: return ViolationKind::UnknownMeasurement;
    case AttackKind::RopChain: return ViolationKind::UnknownMeasurement;
    case AttackKind::FunctionReuse: return ViolationKind::ShadowStackMismatch;
    case AttackKind::MeasurementDrop: return ViolationKind::ChainBreak;
    case AttackKind::ReportTamper: return ViolationKind::Integrity;
    case AttackKind::ReportReplay: return ViolationKind::Replay;
    case AttackKind::ReportDrop: return ViolationKind::Replay;
  }
  throw SpecError("bad attack kind value");
}

namespace {

std::uint64_t thread_at(const std::vector<TraceEvent>& trace,
                        std::size_t position) {
  if (trace.empty()) throw SpecError("cannot attack an empty trace");
  if (position < trace.size()) return trace[position].threadId;
  return trace.back().threadId;
}

} // namespace

std::vector<TraceEvent> inject_new_edge(const Cfg& cfg,
                                        const std::vector<TraceEvent>& trace,
                                        std::size_t position, const Edge& edge) {
  if (position > trace.size()) throw SpecError("injection position past trace end");
  if (edge.kind == EdgeKind::Fallthrough) {
    throw SpecError("injected edge must be significant (call/return/branch)");
  }
  if (cfg.has_edge_between(edge.src, edge.dst)) {
    throw SpecError("edge " + edge.src + " -> " + edge.dst +
                    " is already a legal CFG edge; injection needs a new one");
  }
  std::vector<TraceEvent> out = trace;
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(position),
             TraceEvent::edge_traversal(thread_at(trace, position), edge));
  return out;
}

std::vector<TraceEvent> inject_rop_chain(const Cfg& cfg,
                                         const std::vector<TraceEvent>& trace,
                                         std::size_t position,
                                         const std::vector<Edge>& gadgets) {
  if (position > trace.size()) throw SpecError("injection position past trace end");
  if (gadgets.size() < 2) {
    throw SpecError("a return-oriented chain needs at least two gadget edges");
  }
  for (const Edge& g : gadgets) {
    if (g.kind != EdgeKind::Return) {
      throw SpecError("gadget edges must be returns, got " +
                      edge_kind_name(g.kind) + " for " + g.src + " -> " + g.dst);
    }
  }
  bool allLegal = std::all_of(gadgets.begin(), gadgets.end(), [&](const Edge& g) {
    return cfg.has_edge(g);
  });
  std::uint64_t tid = thread_at(trace, position);
  std::vector<TraceEvent> out = trace;
  auto at = out.begin() + static_cast<std::ptrdiff_t>(position);
  for (auto it = gadgets.rbegin(); it != gadgets.rend(); ++it) {
    at = out.insert(at, TraceEvent::edge_traversal(tid, *it));
  }
  (void)allLegal; // legal-edge chains are still caught by the shadow stack
  return out;
}

namespace {

// Re-run the prover over a mutated trace and check it stays inside the DB:
// every produced triplet known (C1) and every fragment chained (C2).
bool triplet_preserving(const MeasurementsDb& db,
                        const std::vector<TraceEvent>& trace,
                        std::span<const std::uint8_t> key,
                        std::uint64_t batchLimit) {
  ProverSession session(
      ProverConfig{{key.begin(), key.end()}, {}, batchLimit, db.algo()});
  std::vector<PartialReport> reports;
  try {
    replay_trace(session, trace,
                 [&](const PartialReport& r) { reports.push_back(r); });
  } catch (const SpecError&) {
    return false;
  }
  std::map<std::uint64_t, std::optional<std::string>> lastCpB;
  for (const auto& report : reports) {
    for (const auto& m : report.measurements) {
      if (!db.lookup(MeasurementKey{m.cpA, m.cpB, m.loaHash})) return false;
      auto& last = lastCpB[report.threadId];
      if (last && *last != m.cpA) return false;
      if (!last && db.checkpoint_kind(m.cpA) != CheckpointKind::ThreadBegin) {
        return false;
      }
      last = m.cpB;
    }
  }
  return true;
}

} // namespace

std::vector<TraceEvent> reuse_function_return(
    const Cfg& cfg, const MeasurementsDb& db,
    const std::vector<TraceEvent>& trace, std::size_t position,
    const std::vector<TraceEvent>& replacement, std::uint64_t batchLimit) {
  (void)cfg;
  if (position > trace.size()) throw SpecError("swap position past trace end");
  std::vector<TraceEvent> out(trace.begin(),
                              trace.begin() + static_cast<std::ptrdiff_t>(position));
  out.insert(out.end(), replacement.begin(), replacement.end());
  if (out == trace) {
    throw SpecError("swap does not change the trace");
  }
  static const std::uint8_t probeKey[] = {0x5c};
  if (!triplet_preserving(db, out, probeKey, batchLimit)) {
    throw SpecError(
        "swap is not triplet-preserving: it breaks C1/C2 and would be plain "
        "code injection, not control-flow reuse");
  }
  return out;
}

std::vector<PartialReport> drop_measurement(
    const std::vector<PartialReport>& reports, std::uint64_t threadId,
    std::uint64_t ordinal, std::span<const std::uint8_t> key,
    const std::array<std::uint8_t, 16>& nonce, HashAlgo algo) {
  std::vector<PartialReport> out = reports;
  std::uint64_t seen = 0;
  for (auto& report : out) {
    if (report.threadId != threadId) continue;
    if (ordinal < seen + report.measurements.size()) {
      auto at = report.measurements.begin() +
                static_cast<std::ptrdiff_t>(ordinal - seen);
      report.measurements.erase(at);
      report.fingerprint = report_fingerprint(key, nonce, report, algo);
      return out;
    }
    seen += report.measurements.size();
  }
  throw SpecError("no measurement with ordinal " + std::to_string(ordinal) +
                  " for thread " + std::to_string(threadId));
}

namespace {

std::size_t find_report(const std::vector<PartialReport>& reports,
                        std::uint64_t threadId, std::uint64_t index) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].threadId == threadId && reports[i].index == index) return i;
  }
  throw SpecError("no report with index " + std::to_string(index) +
                  " for thread " + std::to_string(threadId));
}

} // namespace

std::vector<PartialReport> tamper_report(const std::vector<PartialReport>& reports,
                                         std::uint64_t threadId,
                                         std::uint64_t index) {
  std::vector<PartialReport> out = reports;
  PartialReport& victim = out[find_report(reports, threadId, index)];
  if (victim.measurements.empty()) {
    throw SpecError("cannot tamper an empty report body");
  }
  victim.measurements[0].loaHash[0] ^= 0x01;
  return out;
}

std::vector<PartialReport> replay_report(const std::vector<PartialReport>& reports,
                                         std::uint64_t threadId,
                                         std::uint64_t index) {
  std::vector<PartialReport> out = reports;
  std::size_t at = find_report(reports, threadId, index);
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(at) + 1, out[at]);
  return out;
}

std::vector<PartialReport> drop_report(const std::vector<PartialReport>& reports,
                                       std::uint64_t threadId,
                                       std::uint64_t index) {
  std::size_t at = find_report(reports, threadId, index);
  bool lastOfThread = std::none_of(
      reports.begin() + static_cast<std::ptrdiff_t>(at) + 1, reports.end(),
      [&](const PartialReport& r) { return r.threadId == threadId; });
  if (lastOfThread) {
    throw SpecError(
        "dropping a thread's final report leaves no later index to expose "
        "the gap");
  }
  std::vector<PartialReport> out = reports;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(at));
  return out;
}

// ---------------------------------------------------------------------------
// Spec files

namespace {

Edge edge_from_json(const json& j) {
  return Edge{j.at("src").get<std::string>(), j.at("dst").get<std::string>(),
              edge_kind_from_name(j.at("kind").get<std::string>())};
}

TraceEvent event_from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  std::uint64_t tid = j.at("thread").get<std::uint64_t>();
  if (type == "edge") {
    return TraceEvent::edge_traversal(tid, edge_from_json(j));
  }
  if (type == "cross") {
    return TraceEvent::checkpoint_cross(tid, j.at("node").get<std::string>());
  }
  throw ValidationError("unknown trace event type: " + type);
}

} // namespace

AttackSpec parse_attack_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("attack spec is not valid JSON: ") +
                          e.what());
  }
  try {
    AttackSpec spec;
    spec.kind = attack_kind_from_name(doc.at("kind").get<std::string>());
    switch (spec.kind) {
      case AttackKind::CodeInjection:
        spec.position = doc.at("position").get<std::size_t>();
        spec.edge = edge_from_json(doc.at("edge"));
        break;
      case AttackKind::RopChain:
        spec.position = doc.at("position").get<std::size_t>();
        for (const auto& g : doc.at("gadgets")) {
          spec.gadgets.push_back(edge_from_json(g));
        }
        break;
      case AttackKind::FunctionReuse:
        spec.position = doc.at("position").get<std::size_t>();
        for (const auto& ev : doc.at("replacement")) {
          spec.replacement.push_back(event_from_json(ev));
        }
        break;
      case AttackKind::MeasurementDrop:
        spec.threadId = doc.at("thread").get<std::uint64_t>();
        spec.ordinal = doc.at("measurement").get<std::uint64_t>();
        break;
      case AttackKind::ReportTamper:
      case AttackKind::ReportReplay:
      case AttackKind::ReportDrop:
        spec.threadId = doc.at("thread").get<std::uint64_t>();
        spec.ordinal = doc.at("report").get<std::uint64_t>();
        break;
    }
    if (doc.contains("expect")) {
      std::string name = doc.at("expect").get<std::string>();
      for (auto kind :
           {ViolationKind::Integrity, ViolationKind::Replay,
            ViolationKind::UnknownMeasurement, ViolationKind::ChainBreak,
            ViolationKind::ShadowStackMismatch, ViolationKind::Underflow}) {
        if (violation_kind_name(kind) == name) {
          spec.expect = kind;
          break;
        }
      }
      if (!spec.expect) throw ValidationError("unknown violation kind: " + name);
    }
    return spec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("attack spec is malformed: ") + e.what());
  }
}

AttackSpec load_attack_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open attack spec: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_attack_spec(buf.str());
}

AttackRun run_attack(const Cfg& cfg, const MeasurementsDb& db,
                     const std::vector<TraceEvent>& trace,
                     const AttackSpec& spec, std::span<const std::uint8_t> key,
                     const std::array<std::uint8_t, 16>& nonce,
                     std::uint64_t batchLimit) {
  std::vector<TraceEvent> finalTrace;
  switch (spec.kind) {
    case AttackKind::CodeInjection:
      finalTrace = inject_new_edge(cfg, trace, spec.position, spec.edge);
      break;
    case AttackKind::RopChain:
      finalTrace = inject_rop_chain(cfg, trace, spec.position, spec.gadgets);
      break;
    case AttackKind::FunctionReuse:
      finalTrace = reuse_function_return(cfg, db, trace, spec.position,
                                         spec.replacement, batchLimit);
      break;
    default:
      finalTrace = trace;
      break;
  }

  ProverConfig pc{{key.begin(), key.end()}, nonce, batchLimit, db.algo()};
  // No checkpoint-table validation here: mutated traces are exactly the
  // input an adversarial prover would feed, and must reach the verifier.
  ProverSession session(pc);
  std::vector<PartialReport> reports;
  replay_trace(session, trace.empty() ? trace : finalTrace,
               [&](const PartialReport& r) { reports.push_back(r); });

  switch (spec.kind) {
    case AttackKind::MeasurementDrop:
      reports = drop_measurement(reports, spec.threadId, spec.ordinal, key,
                                 nonce, db.algo());
      break;
    case AttackKind::ReportTamper:
      reports = tamper_report(reports, spec.threadId, spec.ordinal);
      break;
    case AttackKind::ReportReplay:
      reports = replay_report(reports, spec.threadId, spec.ordinal);
      break;
    case AttackKind::ReportDrop:
      reports = drop_report(reports, spec.threadId, spec.ordinal);
      break;
    default:
      break;
  }

  AttackRun run;
  run.reports = reports;
  VerifierSession verifier({key.begin(), key.end()}, nonce, db);
  for (const auto& report : reports) {
    if (auto v = verifier.verify_report(report)) {
      run.observed = v;
      break;
    }
    ++run.reportsAccepted;
  }
  return run;
}

} // namespace scarr
