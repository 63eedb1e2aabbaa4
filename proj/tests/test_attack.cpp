#include <doctest.h>

#include <string>
#include <vector>

#include "scarr/attack.hpp"
#include "scarr/cfg.hpp"
#include "scarr/errors.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/prover.hpp"
#include "scarr/verifier.hpp"

using namespace scarr;

namespace {

std::string fixture(const std::string& name) {
  return std::string(SCARR_FIXTURES_DIR) + "/" + name;
}

const std::vector<std::uint8_t> kKey{'a', 't', 'k'};
const std::array<std::uint8_t, 16> kNonce{3, 1, 4, 1, 5, 9, 2, 6,
                                          5, 3, 5, 8, 9, 7, 9, 3};

struct Rig {
  Cfg cfg;
  MeasurementsDb db;
  std::vector<TraceEvent> trace;
};

Rig rig(const std::string& cfgName, const std::string& traceName) {
  Cfg cfg = identify_checkpoints(load_cfg_file(fixture(cfgName)));
  auto entries = enumerate_loas(cfg, HashAlgo::Blake2b256);
  auto retTo = compute_ret_to(cfg, entries);
  MeasurementsDb db =
      build_db(cfg, entries, retTo, Digest{}, HashAlgo::Blake2b256);
  return Rig{std::move(cfg), std::move(db),
             load_trace_file(fixture(traceName))};
}

std::vector<PartialReport> honest_reports(const Rig& r, std::uint64_t batch) {
  ProverSession session(
      ProverConfig{kKey, kNonce, batch, HashAlgo::Blake2b256},
      r.db.checkpoints());
  std::vector<PartialReport> reports;
  replay_trace(session, r.trace,
               [&](const PartialReport& rep) { reports.push_back(rep); });
  return reports;
}

std::optional<Violation> verify_all(const Rig& r,
                                    const std::vector<PartialReport>& reports) {
  VerifierSession v(kKey, kNonce, r.db);
  for (const auto& rep : reports) {
    if (auto violation = v.verify_report(rep)) return violation;
  }
  return std::nullopt;
}

} // namespace

TEST_CASE("code injection fixture: unknown measurement") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  AttackSpec spec = load_attack_spec_file(fixture("six_node_inject.atk"));
  CHECK(spec.kind == AttackKind::CodeInjection);
  auto run = run_attack(r.cfg, r.db, r.trace, spec, kKey, kNonce);
  REQUIRE(run.observed.has_value());
  CHECK(run.observed->kind == ViolationKind::UnknownMeasurement);
  CHECK(run.observed->kind == expected_violation(spec.kind));
  CHECK(run.reportsAccepted == 0);
}

TEST_CASE("rop chain fixture: unknown measurement") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  AttackSpec spec = load_attack_spec_file(fixture("six_node_rop.atk"));
  CHECK(spec.kind == AttackKind::RopChain);
  auto run = run_attack(r.cfg, r.db, r.trace, spec, kKey, kNonce);
  REQUIRE(run.observed.has_value());
  CHECK(run.observed->kind == ViolationKind::UnknownMeasurement);
}

TEST_CASE("function reuse fixture: shadow stack mismatch at ordinal 2") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  AttackSpec spec = load_attack_spec_file(fixture("main_a_reuse.atk"));
  CHECK(spec.kind == AttackKind::FunctionReuse);
  auto run = run_attack(r.cfg, r.db, r.trace, spec, kKey, kNonce);
  REQUIRE(run.observed.has_value());
  CHECK(run.observed->kind == ViolationKind::ShadowStackMismatch);
  CHECK(run.observed->measurementOrdinal == 2);
  // Every triplet in the mutated stream individually exists in the DB: the
  // attack is invisible to C1 and C2 and only C3 can see it.
  REQUIRE(run.reports.size() == 1);
  for (const auto& m : run.reports[0].measurements) {
    CHECK(r.db.lookup({m.cpA, m.cpB, m.loaHash}) != nullptr);
  }
}

TEST_CASE("injection refuses degenerate setups") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  // A legal CFG edge is not an injection.
  CHECK_THROWS_AS(inject_new_edge(r.cfg, r.trace, 2,
                                  {"N2", "N3", EdgeKind::Branch}),
                  SpecError);
  // Fallthrough edges are never measured, so the verifier could not see one.
  CHECK_THROWS_AS(inject_new_edge(r.cfg, r.trace, 2,
                                  {"N6", "N1", EdgeKind::Fallthrough}),
                  SpecError);
  CHECK_THROWS_AS(inject_new_edge(r.cfg, r.trace, r.trace.size() + 1,
                                  {"N6", "N1", EdgeKind::Branch}),
                  SpecError);
  // A chain needs at least two return gadgets of return kind.
  CHECK_THROWS_AS(inject_rop_chain(r.cfg, r.trace, 2,
                                   {{"N3", "G1", EdgeKind::Return}}),
                  SpecError);
  CHECK_THROWS_AS(
      inject_rop_chain(r.cfg, r.trace, 2,
                       {{"N3", "G1", EdgeKind::Return},
                        {"G1", "N2", EdgeKind::Branch}}),
      SpecError);
}

TEST_CASE("reuse validation rejects non-triplet-preserving replacements") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  // Produces the fragment (C, E) with a LoA the DB has never seen.
  std::vector<TraceEvent> breaksC1 = {
      TraceEvent::edge_traversal(1, {"A2", "M2", EdgeKind::Return}),
      TraceEvent::edge_traversal(1, {"A2", "M4", EdgeKind::Return}),
      TraceEvent::checkpoint_cross(1, "E"),
  };
  CHECK_THROWS_AS(
      reuse_function_return(r.cfg, r.db, r.trace, 12, breaksC1), SpecError);
}

TEST_CASE("measurement drop breaks the chain at the join") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  auto reports = honest_reports(r, 50000);
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].measurements.size() == 3);

  // Dropping the thread's first fragment leaves the stream starting at an
  // exit point, which the begin-of-thread rule rejects.
  auto dropped = drop_measurement(reports, 1, 0, kKey, kNonce,
                                  HashAlgo::Blake2b256);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].measurements.size() == 2);
  auto violation = verify_all(r, dropped);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::ChainBreak);
  CHECK(violation->kind == expected_violation(AttackKind::MeasurementDrop));

  // Dropping the middle fragment keeps the chain (C to C to E collapses to
  // C to E) but leaves the second call unanswered: the shadow stack sees it.
  auto droppedMid = drop_measurement(reports, 1, 1, kKey, kNonce,
                                     HashAlgo::Blake2b256);
  auto vMid = verify_all(r, droppedMid);
  REQUIRE(vMid.has_value());
  CHECK(vMid->kind == ViolationKind::ShadowStackMismatch);
}

TEST_CASE("report tamper is an integrity violation") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  auto reports = honest_reports(r, 1);
  auto tampered = tamper_report(reports, 1, 1);
  auto violation = verify_all(r, tampered);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::Integrity);
  CHECK(violation->reportIndex == 1);
}

TEST_CASE("report replay and drop are freshness violations") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  auto reports = honest_reports(r, 1);
  REQUIRE(reports.size() == 3);

  auto replayed = replay_report(reports, 1, 1);
  CHECK(replayed.size() == 4);
  auto vReplay = verify_all(r, replayed);
  REQUIRE(vReplay.has_value());
  CHECK(vReplay->kind == ViolationKind::Replay);

  auto droppedStream = drop_report(reports, 1, 1);
  CHECK(droppedStream.size() == 2);
  auto vDrop = verify_all(r, droppedStream);
  REQUIRE(vDrop.has_value());
  CHECK(vDrop->kind == ViolationKind::Replay);

  // The final report has nothing after it to expose the gap.
  CHECK_THROWS_AS(drop_report(reports, 1, 2), SpecError);
}

TEST_CASE("attack specs parse and carry expectations") {
  AttackSpec spec = parse_attack_spec(
      R"({"kind":"report_replay","thread":1,"report":0,"expect":"replay"})");
  CHECK(spec.kind == AttackKind::ReportReplay);
  CHECK(spec.threadId == 1);
  CHECK(spec.ordinal == 0);
  REQUIRE(spec.expect.has_value());
  CHECK(*spec.expect == ViolationKind::Replay);

  CHECK_THROWS_AS(parse_attack_spec(R"({"kind":"quantum"})"), ValidationError);
  CHECK_THROWS_AS(parse_attack_spec("nope"), ValidationError);
  CHECK_THROWS_AS(
      parse_attack_spec(R"({"kind":"report_drop","thread":1,"report":0,
                            "expect":"heat_death"})"),
      ValidationError);
}

TEST_CASE("run_attack drives report-level attacks end to end") {
  Rig r = rig("main_a.json", "main_a_honest.trace");

  AttackSpec tamper;
  tamper.kind = AttackKind::ReportTamper;
  tamper.threadId = 1;
  tamper.ordinal = 0;
  auto runTamper = run_attack(r.cfg, r.db, r.trace, tamper, kKey, kNonce, 1);
  REQUIRE(runTamper.observed.has_value());
  CHECK(runTamper.observed->kind == ViolationKind::Integrity);

  AttackSpec replay;
  replay.kind = AttackKind::ReportReplay;
  replay.threadId = 1;
  replay.ordinal = 0;
  auto runReplay = run_attack(r.cfg, r.db, r.trace, replay, kKey, kNonce, 1);
  REQUIRE(runReplay.observed.has_value());
  CHECK(runReplay.observed->kind == ViolationKind::Replay);
  CHECK(runReplay.reportsAccepted == 1);

  AttackSpec drop;
  drop.kind = AttackKind::ReportDrop;
  drop.threadId = 1;
  drop.ordinal = 1;
  auto runDrop = run_attack(r.cfg, r.db, r.trace, drop, kKey, kNonce, 1);
  REQUIRE(runDrop.observed.has_value());
  CHECK(runDrop.observed->kind == ViolationKind::Replay);

  AttackSpec mdrop;
  mdrop.kind = AttackKind::MeasurementDrop;
  mdrop.threadId = 1;
  mdrop.ordinal = 0;
  auto runMdrop = run_attack(r.cfg, r.db, r.trace, mdrop, kKey, kNonce);
  REQUIRE(runMdrop.observed.has_value());
  CHECK(runMdrop.observed->kind == ViolationKind::ChainBreak);
}

TEST_CASE("control-flow-neutral tampering stays invisible by design") {
  // Data-only changes never touch the trace, so the attested stream is
  // bit-identical to the honest one and must still verify: the scheme
  // covers control flow, not data flow.
  Rig r = rig("main_a.json", "main_a_honest.trace");
  auto reports = honest_reports(r, 50000);
  CHECK_FALSE(verify_all(r, reports).has_value());

  // Same story for a jump that follows existing edges (legal-edge "JOP"):
  // detection is the shadow stack's job only when call/return structure is
  // violated; plain legal branches verify clean.
  CHECK_FALSE(verify_all(r, honest_reports(r, 2)).has_value());
}

TEST_CASE("attack kind names round-trip") {
  for (AttackKind kind :
       {AttackKind::CodeInjection, AttackKind::RopChain,
        AttackKind::FunctionReuse, AttackKind::MeasurementDrop,
        AttackKind::ReportTamper, AttackKind::ReportReplay,
        AttackKind::ReportDrop}) {
    CHECK(attack_kind_from_name(attack_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(attack_kind_from_name("cosmic_rays"), ValidationError);
}
