#include <doctest.h>

#include <string>
#include <vector>

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

const std::vector<std::uint8_t> kKey{'v', 'e', 'r', 'y', 'k'};
const std::array<std::uint8_t, 16> kNonce{9, 9, 9, 9, 1, 2, 3, 4,
                                          5, 6, 7, 8, 0, 0, 0, 1};

struct Setup {
  Cfg cfg;
  MeasurementsDb db;
  std::vector<TraceEvent> trace;
};

Setup setup(const std::string& cfgName, const std::string& traceName) {
  Cfg cfg = identify_checkpoints(load_cfg_file(fixture(cfgName)));
  auto entries = enumerate_loas(cfg, HashAlgo::Blake2b256);
  auto retTo = compute_ret_to(cfg, entries);
  MeasurementsDb db =
      build_db(cfg, entries, retTo, Digest{}, HashAlgo::Blake2b256);
  auto trace = load_trace_file(fixture(traceName));
  return Setup{std::move(cfg), std::move(db), std::move(trace)};
}

std::vector<PartialReport> seal(const Setup& s, std::uint64_t batch) {
  ProverSession session(ProverConfig{kKey, kNonce, batch, HashAlgo::Blake2b256},
                        s.db.checkpoints());
  std::vector<PartialReport> reports;
  replay_trace(session, s.trace,
               [&](const PartialReport& r) { reports.push_back(r); });
  return reports;
}

void refingerprint(PartialReport& r) {
  r.fingerprint = report_fingerprint(kKey, kNonce, r, HashAlgo::Blake2b256);
}

} // namespace

TEST_CASE("honest streams verify clean") {
  for (auto [cfgName, traceName] :
       {std::pair{"six_node.json", "six_node_honest.trace"},
        std::pair{"loop.json", "loop_honest.trace"},
        std::pair{"main_a.json", "main_a_honest.trace"}}) {
    CAPTURE(cfgName);
    Setup s = setup(cfgName, traceName);
    for (std::uint64_t batch : {std::uint64_t(1), std::uint64_t(50000)}) {
      auto reports = seal(s, batch);
      VerifierSession v(kKey, kNonce, s.db);
      for (const auto& r : reports) {
        auto violation = v.verify_report(r);
        if (violation) CAPTURE(render_violation(*violation));
        CHECK_FALSE(violation.has_value());
      }
      CHECK(v.all_stacks_empty());
      CHECK(v.reports_accepted() == reports.size());
    }
  }
}

TEST_CASE("interleaved threads keep independent chains") {
  Setup s = setup("six_node.json", "six_node_two_threads.trace");
  auto reports = seal(s, 1);
  REQUIRE(reports.size() == 4);
  VerifierSession v(kKey, kNonce, s.db);
  for (const auto& r : reports) CHECK_FALSE(v.verify_report(r).has_value());
  REQUIRE(v.thread_state(1) != nullptr);
  REQUIRE(v.thread_state(2) != nullptr);
  CHECK(v.thread_state(1)->expectedIndex == 2);
  CHECK(v.thread_state(2)->expectedIndex == 2);
  CHECK(v.thread_state(1)->ended);
  CHECK(v.thread_state(2)->ended);
  CHECK(v.thread_state(3) == nullptr);
}

TEST_CASE("first fragment must start at a thread begin checkpoint") {
  Setup s = setup("main_a.json", "main_a_honest.trace");
  auto reports = seal(s, 50000);
  REQUIRE(reports.size() == 1);
  PartialReport bad = reports[0];
  bad.measurements.erase(bad.measurements.begin()); // now starts at (C, C)
  refingerprint(bad);
  VerifierSession v(kKey, kNonce, s.db);
  auto violation = v.verify_report(bad);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::ChainBreak);
  CHECK(violation->measurementOrdinal == 0);
}

TEST_CASE("fragments must chain across reports") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  auto reports = seal(s, 1);
  REQUIRE(reports.size() == 2);
  // Replace report 1's fragment (N3, N6) with the legal entry (N4, N6):
  // individually known, but it does not start where report 0 ended.
  Cfg cfg = identify_checkpoints(load_cfg_file(fixture("six_node.json")));
  auto entries = enumerate_loas(cfg, HashAlgo::Blake2b256);
  PartialReport bad = reports[1];
  bool patched = false;
  for (const auto& e : entries) {
    if (e.key.cpA == "N4" && e.key.cpB == "N6") {
      bad.measurements[0] = {e.key.cpA, e.key.cpB, e.key.loaHash};
      patched = true;
    }
  }
  REQUIRE(patched);
  refingerprint(bad);

  VerifierSession v(kKey, kNonce, s.db);
  CHECK_FALSE(v.verify_report(reports[0]).has_value());
  auto violation = v.verify_report(bad);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::ChainBreak);
  CHECK(violation->reportIndex == 1);
  CHECK(violation->measurementOrdinal == 0);
}

TEST_CASE("unknown measurement is flagged with its ordinal") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  auto reports = seal(s, 50000);
  REQUIRE(reports.size() == 1);
  PartialReport bad = reports[0];
  bad.measurements[1].loaHash[3] ^= 0x5a;
  refingerprint(bad);
  VerifierSession v(kKey, kNonce, s.db);
  auto violation = v.verify_report(bad);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::UnknownMeasurement);
  CHECK(violation->measurementOrdinal == 1);
}

TEST_CASE("integrity failures are caught before anything else") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  auto reports = seal(s, 50000);
  PartialReport bad = reports[0];

  SUBCASE("flipped fingerprint bit") { bad.fingerprint[0] ^= 0x01; }
  SUBCASE("tampered body under old fingerprint") {
    bad.measurements[0].cpA = "N9";
  }
  SUBCASE("wrong session nonce") {
    auto otherNonce = kNonce;
    otherNonce[15] ^= 0xff;
    bad.fingerprint =
        report_fingerprint(kKey, otherNonce, bad, HashAlgo::Blake2b256);
  }

  VerifierSession v(kKey, kNonce, s.db);
  auto violation = v.verify_report(bad);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::Integrity);
  CHECK_FALSE(violation->measurementOrdinal.has_value());
}

TEST_CASE("replayed and out-of-order reports are rejected") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  auto reports = seal(s, 1);
  REQUIRE(reports.size() == 2);
  VerifierSession v(kKey, kNonce, s.db);
  CHECK_FALSE(v.verify_report(reports[0]).has_value());

  SUBCASE("same report again") {
    auto violation = v.verify_report(reports[0]);
    REQUIRE(violation.has_value());
    CHECK(violation->kind == ViolationKind::Replay);
  }
  SUBCASE("skipping ahead looks like a dropped report") {
    PartialReport future = reports[1];
    future.index = 5;
    refingerprint(future);
    auto violation = v.verify_report(future);
    REQUIRE(violation.has_value());
    CHECK(violation->kind == ViolationKind::Replay);
  }
  SUBCASE("the in-order report is still fine") {
    CHECK_FALSE(v.verify_report(reports[1]).has_value());
  }
}

TEST_CASE("repeated function reuse trips the shadow stack at ordinal 2") {
  Setup s = setup("main_a.json", "main_a_honest.trace");
  auto reports = seal(s, 50000);
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].measurements.size() == 3);
  PartialReport bad = reports[0];
  bad.measurements[2] = bad.measurements[1]; // answer the second call with
  refingerprint(bad);                        // the first call's return
  VerifierSession v(kKey, kNonce, s.db);
  auto violation = v.verify_report(bad);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::ShadowStackMismatch);
  CHECK(violation->measurementOrdinal == 2);
}

TEST_CASE("thread end with an unanswered call is a mismatch") {
  // Hand-built DB whose only fragment runs begin-to-end while leaving a call
  // frame open; the end-of-thread balance check must reject it.
  Loa loa{{Edge{"f", "g", EdgeKind::Call}}};
  OfflineMeasurement m;
  m.key = {"S", "E", hash_loa(loa, HashAlgo::Blake2b256)};
  m.callRetSubset = loa.edges;
  MeasurementsDb db = MeasurementsDb::build(
      HashAlgo::Blake2b256, Digest{}, {m}, {},
      {{"S", CheckpointKind::ThreadBegin}, {"E", CheckpointKind::ThreadEnd}});

  PartialReport r;
  r.index = 0;
  r.threadId = 4;
  r.measurements.push_back({"S", "E", m.key.loaHash});
  refingerprint(r);
  VerifierSession v(kKey, kNonce, db);
  auto violation = v.verify_report(r);
  REQUIRE(violation.has_value());
  CHECK(violation->kind == ViolationKind::ShadowStackMismatch);
  CHECK(violation->measurementOrdinal == 0);
  CHECK(violation->detail.find("unanswered") != std::string::npos);
}

TEST_CASE("apply_loa replays call/return subsets") {
  Setup s = setup("main_a.json", "main_a_honest.trace");
  const RetToIndex& retTo = s.db.ret_to();
  Edge c1{"M1", "A1", EdgeKind::Call};
  Edge c2{"M3", "A1", EdgeKind::Call};
  Edge r1{"A2", "M2", EdgeKind::Return};
  Edge r2{"A2", "M4", EdgeKind::Return};

  ShadowStackState shadow;
  CHECK_FALSE(apply_loa(shadow, std::vector<Edge>{c1}, retTo).has_value());
  REQUIRE(shadow.stack.size() == 1);

  SUBCASE("return matching the pending call pops it") {
    CHECK_FALSE(apply_loa(shadow, std::vector<Edge>{r1, c2}, retTo).has_value());
    REQUIRE(shadow.stack.size() == 1);
    CHECK(shadow.stack.back() == c2);
    CHECK_FALSE(apply_loa(shadow, std::vector<Edge>{r2}, retTo).has_value());
    CHECK(shadow.stack.empty());
  }
  SUBCASE("return for a different call site is a mismatch") {
    auto violation = apply_loa(shadow, std::vector<Edge>{r2}, retTo);
    REQUIRE(violation.has_value());
    CHECK(violation->kind == ViolationKind::ShadowStackMismatch);
    // Failed application leaves the stack untouched.
    REQUIRE(shadow.stack.size() == 1);
    CHECK(shadow.stack.back() == c1);
  }
  SUBCASE("return on an empty stack is an underflow") {
    ShadowStackState empty;
    auto violation = apply_loa(empty, std::vector<Edge>{r1}, retTo);
    REQUIRE(violation.has_value());
    CHECK(violation->kind == ViolationKind::Underflow);
  }
  SUBCASE("stored subsets may not carry branch edges") {
    Edge stray{"N1", "N2", EdgeKind::Branch};
    auto violation = apply_loa(shadow, std::vector<Edge>{stray}, retTo);
    REQUIRE(violation.has_value());
    CHECK(violation->kind == ViolationKind::ShadowStackMismatch);
  }
}

TEST_CASE("a rejected report does not advance the session") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  auto reports = seal(s, 1);
  REQUIRE(reports.size() == 2);
  VerifierSession v(kKey, kNonce, s.db);
  CHECK_FALSE(v.verify_report(reports[0]).has_value());

  PartialReport bad = reports[1];
  bad.measurements[0].loaHash[0] ^= 1;
  refingerprint(bad);
  CHECK(v.verify_report(bad).has_value());
  CHECK(v.reports_accepted() == 1);

  // The honest continuation still verifies.
  CHECK_FALSE(v.verify_report(reports[1]).has_value());
  CHECK(v.reports_accepted() == 2);
}

TEST_CASE("violation rendering is one parseable line") {
  Violation v{ViolationKind::ChainBreak, 3, 7, 2, "x y"};
  CHECK(render_violation(v) ==
        "VIOLATION kind=chain_break thread=3 report=7 measurement=2 detail=x y");
  Violation noOrd{ViolationKind::Integrity, 1, 0, std::nullopt, "d"};
  CHECK(render_violation(noOrd) ==
        "VIOLATION kind=integrity thread=1 report=0 measurement=- detail=d");
}

TEST_CASE("challenges carry fresh nonces bound to the session") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  auto [ch1, v1] = issue_challenge({'i', 'n'}, kKey, s.db);
  auto [ch2, v2] = issue_challenge({'i', 'n'}, kKey, s.db);
  CHECK(ch1.input == std::vector<std::uint8_t>{'i', 'n'});
  CHECK(ch1.nonce != ch2.nonce);
  CHECK(v1.nonce() == ch1.nonce);

  ProverSession p(
      ProverConfig{kKey, ch1.nonce, 50000, HashAlgo::Blake2b256},
      s.db.checkpoints());
  std::vector<PartialReport> reports;
  replay_trace(p, s.trace, [&](const PartialReport& r) { reports.push_back(r); });
  for (const auto& r : reports) CHECK_FALSE(v1.verify_report(r).has_value());
  for (const auto& r : reports) CHECK(v2.verify_report(r).has_value());
}

TEST_CASE("verifier needs a key") {
  Setup s = setup("six_node.json", "six_node_honest.trace");
  CHECK_THROWS_AS(VerifierSession({}, kNonce, s.db), SpecError);
}
