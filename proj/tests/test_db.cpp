#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "scarr/cfg.hpp"
#include "scarr/errors.hpp"
#include "scarr/measurement_db.hpp"

using namespace scarr;

namespace {

std::string fixture(const std::string& name) {
  return std::string(SCARR_FIXTURES_DIR) + "/" + name;
}

MeasurementsDb fixture_db(const std::string& name,
                          HashAlgo algo = HashAlgo::Blake2b256) {
  Cfg cfg = identify_checkpoints(load_cfg_file(fixture(name)));
  auto entries = enumerate_loas(cfg, algo);
  auto retTo = compute_ret_to(cfg, entries);
  Digest programId = hash_bytes(
      std::vector<std::uint8_t>(name.begin(), name.end()), algo);
  return build_db(cfg, entries, retTo, programId, algo);
}

} // namespace

TEST_CASE("db assembly indexes triplets and relations") {
  MeasurementsDb db = fixture_db("main_a.json");
  CHECK(db.size() == 3);
  CHECK(db.ret_to_size() == 2);
  CHECK(db.checkpoint_kind("S") == CheckpointKind::ThreadBegin);
  CHECK(db.checkpoint_kind("C") == CheckpointKind::ExitPoint);
  CHECK(db.checkpoint_kind("E") == CheckpointKind::ThreadEnd);
  CHECK(db.checkpoint_kind("M2") == CheckpointKind::None);

  Cfg cfg = identify_checkpoints(load_cfg_file(fixture("main_a.json")));
  auto entries = enumerate_loas(cfg, HashAlgo::Blake2b256);
  for (const auto& e : entries) {
    const auto* m = db.lookup(e.key);
    REQUIRE(m != nullptr);
    CHECK(m->key == e.key);
    // The stored subset keeps only call/return edges, in LoA order.
    for (const auto& edge : m->callRetSubset) {
      CHECK(edge.kind != EdgeKind::Branch);
      CHECK(edge.kind != EdgeKind::Fallthrough);
    }
  }
  MeasurementKey missing{"S", "E", {}};
  CHECK(db.lookup(missing) == nullptr);

  Edge r{"A2", "M2", EdgeKind::Return};
  Edge c1{"M1", "A1", EdgeKind::Call};
  Edge c2{"M3", "A1", EdgeKind::Call};
  CHECK(db.ret_to_contains(r, c1));
  CHECK_FALSE(db.ret_to_contains(r, c2));
}

TEST_CASE("stream save/load is the identity") {
  for (const char* name : {"six_node.json", "loop.json", "recursion.json",
                           "main_a.json"}) {
    MeasurementsDb db = fixture_db(name);
    std::ostringstream out;
    db.save(out);
    std::istringstream in(out.str());
    MeasurementsDb back = MeasurementsDb::load(in);
    CHECK(back == db);
    CHECK(back.algo() == db.algo());
    CHECK(back.program_id() == db.program_id());
    CHECK(back.entries() == db.entries());
  }
}

TEST_CASE("file save/load is the identity") {
  MeasurementsDb db = fixture_db("recursion.json", HashAlgo::Sha256);
  std::string path = "test_db_roundtrip.scarrdb";
  db.save_file(path);
  MeasurementsDb back = MeasurementsDb::load_file(path);
  CHECK(back == db);
  std::remove(path.c_str());
}

TEST_CASE("load rejects damaged input") {
  MeasurementsDb db = fixture_db("six_node.json");
  std::ostringstream out;
  db.save(out);
  std::string blob = out.str();

  SUBCASE("bad magic") {
    std::string bad = blob;
    bad[0] ^= 0x40;
    std::istringstream in(bad);
    CHECK_THROWS_AS(MeasurementsDb::load(in), ValidationError);
  }
  SUBCASE("truncated") {
    for (std::size_t cut : {std::size_t(4), blob.size() / 2, blob.size() - 1}) {
      std::istringstream in(blob.substr(0, cut));
      CHECK_THROWS_AS(MeasurementsDb::load(in), ValidationError);
    }
  }
  SUBCASE("unknown algorithm id") {
    std::string bad = blob;
    bad[8] = '\x7e'; // algo byte follows the 8-byte magic
    std::istringstream in(bad);
    CHECK_THROWS_AS(MeasurementsDb::load(in), ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(MeasurementsDb::load_file("no_such_file.scarrdb"),
                    ValidationError);
  }
}

TEST_CASE("dbs over different hash algorithms differ") {
  MeasurementsDb a = fixture_db("six_node.json", HashAlgo::Blake2b256);
  MeasurementsDb b = fixture_db("six_node.json", HashAlgo::Sha256);
  CHECK(a.size() == b.size());
  CHECK_FALSE(a == b);
}
