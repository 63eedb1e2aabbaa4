#include "scarr/digest.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "scarr/errors.hpp"

namespace scarr {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium init failed");
}

} // namespace

HashAlgo hash_algo_from_name(const std::string& name) {
  if (name == "blake2b256" || name == "blake2b") return HashAlgo::Blake2b256;
  if (name == "sha256") return HashAlgo::Sha256;
  throw ValidationError("unknown hash algorithm: " + name);
}

std::string hash_algo_name(HashAlgo algo) {
  switch (algo) {
    case HashAlgo::Blake2b256: return "blake2b256";
    case HashAlgo::Sha256: return "sha256";
  }
  throw SpecError("bad hash algo value");
}

Digest hash_bytes(std::span<const std::uint8_t> data, HashAlgo algo) {
  ensure_sodium();
  Digest out{};
  switch (algo) {
    case HashAlgo::Blake2b256:
      crypto_generichash(out.data(), out.size(), data.data(), data.size(),
                         nullptr, 0);
      return out;
    case HashAlgo::Sha256:
      crypto_hash_sha256(out.data(), data.data(), data.size());
      return out;
  }
  throw SpecError("bad hash algo value");
}

Digest hmac(std::span<const std::uint8_t> key, std::span<const std::uint8_t> msg,
            HashAlgo algo) {
  ensure_sodium();
  const std::size_t block = algo == HashAlgo::Sha256 ? 64 : 128;

  std::vector<std::uint8_t> k0(block, 0);
  if (key.size() > block) {
    Digest kd = hash_bytes(key, algo);
    std::memcpy(k0.data(), kd.data(), kd.size());
  } else {
    std::memcpy(k0.data(), key.data(), key.size());
  }

  std::vector<std::uint8_t> inner(block + msg.size());
  for (std::size_t i = 0; i < block; ++i) inner[i] = k0[i] ^ 0x36;
  std::memcpy(inner.data() + block, msg.data(), msg.size());
  Digest ih = hash_bytes(inner, algo);

  std::vector<std::uint8_t> outer(block + ih.size());
  for (std::size_t i = 0; i < block; ++i) outer[i] = k0[i] ^ 0x5c;
  std::memcpy(outer.data() + block, ih.data(), ih.size());
  return hash_bytes(outer, algo);
}

bool digest_equal(const Digest& a, const Digest& b) {
  ensure_sodium();
  return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw ValidationError("hex string has odd length");
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw ValidationError("bad hex digit");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

std::array<std::uint8_t, 16> random_nonce() {
  ensure_sodium();
  std::array<std::uint8_t, 16> n{};
  randombytes_buf(n.data(), n.size());
  return n;
}

} // namespace scarr
