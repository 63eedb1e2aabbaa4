#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scarr {

using Digest = std::array<std::uint8_t, 32>;

enum class HashAlgo : std::uint8_t {
  Blake2b256 = 0x01,
  Sha256 = 0x02,
};

HashAlgo hash_algo_from_name(const std::string& name);
std::string hash_algo_name(HashAlgo algo);

Digest hash_bytes(std::span<const std::uint8_t> data, HashAlgo algo);

// HMAC over the selected hash (RFC 2104 construction; block size 128 for
// BLAKE2b, 64 for SHA-256).
Digest hmac(std::span<const std::uint8_t> key, std::span<const std::uint8_t> msg,
            HashAlgo algo);

// Constant-time digest comparison.
bool digest_equal(const Digest& a, const Digest& b);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);

// 16-byte random nonce (CSPRNG).
std::array<std::uint8_t, 16> random_nonce();

} // namespace scarr
