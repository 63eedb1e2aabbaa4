#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "scarr/digest.hpp"
#include "scarr/errors.hpp"

using namespace scarr;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) {
  return {s.begin(), s.end()};
}

std::string hex_hash(const std::string& data, HashAlgo algo) {
  return to_hex(hash_bytes(bytes(data), algo));
}

} // namespace

// Reference values computed with an independent implementation
// (hashlib/hmac) and frozen here.
TEST_CASE("blake2b-256 known answers") {
  CHECK(hex_hash("", HashAlgo::Blake2b256) ==
        "0e5751c026e543b2e8ab2eb06099daa1d1e5df47778f7787faab45cdf12fe3a8");
  CHECK(hex_hash(std::string("N2\x1f") + "N3\x1e\x03", HashAlgo::Blake2b256) ==
        "33903f871d4d8b6d0863d348a6cd725c3b063c8e1e87db477e5cfa0d15faabec");
  CHECK(hex_hash(std::string("N2\x1f") + "N4\x1e\x03", HashAlgo::Blake2b256) ==
        "e386133b02c557dd2274ce8be7971cb7079dbf80fba52933aecf2487b47b2298");
  CHECK(hex_hash(std::string("N2\x1f") + "N3\x1e\x03" + "N3\x1f" + "N5\x1e\x01",
                 HashAlgo::Blake2b256) ==
        "7368173a28bba4ed0f6bfbb36b9fc14e94555ea44c03c3c26a04ad42315389b7");
}

TEST_CASE("sha-256 known answers") {
  CHECK(hex_hash("", HashAlgo::Sha256) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hex_hash(std::string("N2\x1f") + "N3\x1e\x03", HashAlgo::Sha256) ==
        "d5492acf266e1394ccd512c7c174e9c7395b089ebafc0c7cb24172a43a18a52f");
}

TEST_CASE("hmac-blake2b-256 known answers") {
  CHECK(to_hex(hmac(bytes("key"), bytes("msg"), HashAlgo::Blake2b256)) ==
        "ea48cb6e3033befd567f4a12dae3c046f4ec2895a93751db485417d044dcbb63");

  std::vector<std::uint8_t> k32(32);
  for (int i = 0; i < 32; ++i) k32[i] = static_cast<std::uint8_t>(i);
  CHECK(to_hex(hmac(k32, {}, HashAlgo::Blake2b256)) ==
        "652c4818a846dd289d18d38c934ff0a06b2a78c3a1a4548d8cca2f2b38c35683");
  CHECK(to_hex(hmac(k32, bytes("The quick brown fox"), HashAlgo::Blake2b256)) ==
        "14472acfd88b24738e01130d5d7a5bab58aab062d1e60ca0ea221d4c312b036e");

  // Key longer than the 128-byte block: must be hashed down first.
  std::vector<std::uint8_t> longKey(130, 0xaa);
  CHECK(to_hex(hmac(longKey, bytes("m"), HashAlgo::Blake2b256)) ==
        "38e2a35b4c32c2666da54d3d85f170adf6389d8b9ad7c980f537dcf0f53750d5");
}

TEST_CASE("hmac-sha-256 rfc 4231 test case 1") {
  std::vector<std::uint8_t> key(20, 0x0b);
  CHECK(to_hex(hmac(key, bytes("Hi There"), HashAlgo::Sha256)) ==
        "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
}

TEST_CASE("digest_equal is exact") {
  Digest a = hash_bytes(bytes("x"), HashAlgo::Blake2b256);
  Digest b = a;
  CHECK(digest_equal(a, b));
  b[31] ^= 0x01;
  CHECK_FALSE(digest_equal(a, b));
  b = a;
  b[0] ^= 0x80;
  CHECK_FALSE(digest_equal(a, b));
}

TEST_CASE("hex round trip") {
  std::vector<std::uint8_t> raw{0x00, 0x01, 0xab, 0xff, 0x7f};
  std::string hex = to_hex(raw);
  CHECK(hex == "0001abff7f");
  CHECK(from_hex(hex) == raw);
  CHECK(from_hex("") == std::vector<std::uint8_t>{});
  CHECK_THROWS_AS(from_hex("abc"), ValidationError);   // odd length
  CHECK_THROWS_AS(from_hex("zz"), ValidationError);    // non-hex
}

TEST_CASE("algo names round trip") {
  CHECK(hash_algo_name(HashAlgo::Blake2b256) == "blake2b256");
  CHECK(hash_algo_name(HashAlgo::Sha256) == "sha256");
  CHECK(hash_algo_from_name("blake2b256") == HashAlgo::Blake2b256);
  CHECK(hash_algo_from_name("sha256") == HashAlgo::Sha256);
  CHECK_THROWS_AS(hash_algo_from_name("md5"), ValidationError);
}

TEST_CASE("random nonces are fresh") {
  std::set<std::array<std::uint8_t, 16>> seen;
  for (int i = 0; i < 64; ++i) seen.insert(random_nonce());
  CHECK(seen.size() == 64);
}
