#include <doctest.h>

#include <mutex>
#include <string>
#include <vector>

#include "scarr/cfg.hpp"
#include "scarr/errors.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/net.hpp"
#include "scarr/prover.hpp"

using namespace scarr;

namespace {

std::string fixture(const std::string& name) {
  return std::string(SCARR_FIXTURES_DIR) + "/" + name;
}

const std::vector<std::uint8_t> kKey{'n', 'e', 't', 'k', 'e', 'y'};

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

struct Recorder {
  std::mutex mu;
  std::vector<VerifierServer::SessionRecord> sessions;

  void attach(VerifierServer& server) {
    server.onSession = [this](const VerifierServer::SessionRecord& rec) {
      std::lock_guard<std::mutex> lock(mu);
      sessions.push_back(rec);
    };
  }
};

} // namespace

TEST_CASE("honest prover session over loopback") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  ServerConfig sc;
  sc.port = 0; // ephemeral
  sc.key = kKey;
  sc.challengeInput = {'g', 'o'};
  sc.maxSessions = 1;
  VerifierServer server(sc, r.db);
  Recorder rec;
  rec.attach(server);
  server.start();

  ClientConfig cc;
  cc.port = server.port();
  cc.key = kKey;
  ClientSummary summary =
      run_prover_client(cc, r.db, r.trace, {'d', 'o', 'n', 'e'});
  server.wait();

  CHECK(summary.challengeInput == std::vector<std::uint8_t>{'g', 'o'});
  CHECK(summary.reports == 1);
  CHECK(summary.measurements == 3);
  CHECK(summary.acks == 1);
  CHECK_FALSE(summary.alarmLine.has_value());

  REQUIRE(rec.sessions.size() == 1);
  const auto& s = rec.sessions[0];
  CHECK(s.reports == 1);
  CHECK(s.measurements == 3);
  CHECK_FALSE(s.violation.has_value());
  CHECK(s.sawOutput);
  CHECK(s.output == std::vector<std::uint8_t>{'d', 'o', 'n', 'e'});
}

TEST_CASE("compressed report streams verify the same") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  for (Codec codec : {Codec::Zip, Codec::Lzma, Codec::Bz2, Codec::Zstd}) {
    CAPTURE(codec_name(codec));
    ServerConfig sc;
    sc.port = 0;
    sc.key = kKey;
    sc.maxSessions = 1;
    VerifierServer server(sc, r.db);
    Recorder rec;
    rec.attach(server);
    server.start();

    ClientConfig cc;
    cc.port = server.port();
    cc.key = kKey;
    cc.codec = codec;
    ClientSummary summary = run_prover_client(cc, r.db, r.trace, {});
    server.wait();

    CHECK(summary.acks == summary.reports);
    CHECK_FALSE(summary.alarmLine.has_value());
    REQUIRE(rec.sessions.size() == 1);
    CHECK_FALSE(rec.sessions[0].violation.has_value());
    CHECK(rec.sessions[0].measurements == 2);
  }
}

TEST_CASE("tampered stream raises an alarm and ends the session") {
  Rig r = rig("main_a.json", "main_a_honest.trace");
  ServerConfig sc;
  sc.port = 0;
  sc.key = kKey;
  sc.fixedNonce = std::array<std::uint8_t, 16>{1, 1, 2, 2, 3, 3, 4, 4,
                                               5, 5, 6, 6, 7, 7, 8, 8};
  sc.maxSessions = 1;
  VerifierServer server(sc, r.db);
  Recorder rec;
  rec.attach(server);
  server.start();

  // Build reports under the session nonce, then break the second one.
  ProverSession prover(
      ProverConfig{kKey, *sc.fixedNonce, 1, HashAlgo::Blake2b256},
      r.db.checkpoints());
  std::vector<PartialReport> reports;
  replay_trace(prover, r.trace,
               [&](const PartialReport& rep) { reports.push_back(rep); });
  REQUIRE(reports.size() == 3);
  reports[1].measurements[0].loaHash[7] ^= 0x42;

  ClientConfig cc;
  cc.port = server.port();
  cc.key = kKey;
  ClientSummary summary = run_report_stream_client(cc, reports, {'x'});
  server.wait();

  CHECK(summary.acks == 1); // first report accepted
  REQUIRE(summary.alarmLine.has_value());
  CHECK(summary.alarmLine->find("kind=integrity") != std::string::npos);

  REQUIRE(rec.sessions.size() == 1);
  const auto& s = rec.sessions[0];
  REQUIRE(s.violation.has_value());
  CHECK(s.violation->kind == ViolationKind::Integrity);
  CHECK(s.reports == 1);
  // The alarm ends the session: no Output message is consumed.
  CHECK_FALSE(s.sawOutput);
}

TEST_CASE("multiple sequential sessions get distinct nonces") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  ServerConfig sc;
  sc.port = 0;
  sc.key = kKey;
  sc.maxSessions = 2;
  VerifierServer server(sc, r.db);
  Recorder rec;
  rec.attach(server);
  server.start();

  ClientConfig cc;
  cc.port = server.port();
  cc.key = kKey;
  auto s1 = run_prover_client(cc, r.db, r.trace, {});
  auto s2 = run_prover_client(cc, r.db, r.trace, {});
  server.wait();

  CHECK_FALSE(s1.alarmLine.has_value());
  CHECK_FALSE(s2.alarmLine.has_value());
  CHECK(rec.sessions.size() == 2);
}

TEST_CASE("client with the wrong key is rejected at the first report") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  ServerConfig sc;
  sc.port = 0;
  sc.key = kKey;
  sc.maxSessions = 1;
  VerifierServer server(sc, r.db);
  server.start();

  ClientConfig cc;
  cc.port = server.port();
  cc.key = {'w', 'r', 'o', 'n', 'g'};
  ClientSummary summary = run_prover_client(cc, r.db, r.trace, {});
  server.wait();

  CHECK(summary.acks == 0);
  REQUIRE(summary.alarmLine.has_value());
  CHECK(summary.alarmLine->find("kind=integrity") != std::string::npos);
}

TEST_CASE("connecting to a dead port fails cleanly") {
  Rig r = rig("six_node.json", "six_node_honest.trace");
  ClientConfig cc;
  cc.port = 1; // nothing listens there
  cc.key = kKey;
  CHECK_THROWS_AS(run_prover_client(cc, r.db, r.trace, {}), NetError);
}
