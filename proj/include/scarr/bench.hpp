#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scarr/synth.hpp"
#include "scarr/wire.hpp"

namespace scarr {

struct BenchResult {
  std::string scenario;
  std::string metric;
  std::string unit;
  int runs = 1;
  double mean = 0;
  double stddev = 0;
  double median = 0;
  std::uint64_t seed = 0;
  std::string params;
};

// Measurements produced per second by the prover over the workload trace.
BenchResult bench_attestation(const Workload& w,
                              const std::vector<std::uint8_t>& key, int runs,
                              std::uint64_t batchLimit = 50000);

// Measurements checked per second by the verifier over the honest report
// stream. Throws if the stream does not verify.
BenchResult bench_verification(const Workload& w,
                               const std::vector<std::uint8_t>& key, int runs,
                               std::uint64_t batchLimit = 50000);

// Bytes on the wire for the workload's report stream under each codec.
// raw_payload_bytes is codec-independent and reported once.
std::vector<BenchResult> bench_codecs(const Workload& w,
                                      const std::vector<std::uint8_t>& key,
                                      const std::vector<Codec>& codecs,
                                      std::uint64_t batchLimit = 50000);

// Frame and payload byte totals when the same measurements are shipped one
// per report versus batched.
std::vector<BenchResult> bench_batching(const Workload& w,
                                        const std::vector<std::uint8_t>& key,
                                        const std::vector<std::uint64_t>& batches);

// Shadow stack work profile over the honest stream: call/return edges per
// measurement (mean/median across all measurements) and stack depth.
std::vector<BenchResult> bench_shadow_depth(const Workload& w,
                                            const std::vector<std::uint8_t>& key,
                                            std::uint64_t batchLimit = 50000);

// One unauthenticated report of `measurements` measurements drawn from
// `distinct` triplets, laid out in runs the way loop-heavy execution
// produces them. Input for codec experiments.
PartialReport synthetic_batch(std::size_t measurements, std::size_t distinct,
                              HashAlgo algo = HashAlgo::Blake2b256);

std::string bench_csv(const std::vector<BenchResult>& results);

} // namespace scarr
