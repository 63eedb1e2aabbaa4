#include "scarr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "scarr/errors.hpp"
#include "scarr/verifier.hpp"

namespace scarr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
  return std::max(1e-9, dt.count() * 1e-9);
}

BenchResult summarize(std::string scenario, std::string metric, std::string unit,
                      std::vector<double> samples, std::uint64_t seed,
                      std::string params) {
  BenchResult r;
  r.scenario = std::move(scenario);
  r.metric = std::move(metric);
  r.unit = std::move(unit);
  r.runs = static_cast<int>(samples.size());
  r.seed = seed;
  r.params = std::move(params);
  if (samples.empty()) return r;
  double sum = 0;
  for (double s : samples) sum += s;
  r.mean = sum / samples.size();
  double var = 0;
  for (double s : samples) var += (s - r.mean) * (s - r.mean);
  r.stddev = samples.size() > 1 ? std::sqrt(var / (samples.size() - 1)) : 0.0;
  std::sort(samples.begin(), samples.end());
  std::size_t mid = samples.size() / 2;
  r.median = samples.size() % 2 ? samples[mid]
                                : (samples[mid - 1] + samples[mid]) / 2.0;
  return r;
}

std::vector<PartialReport> seal_workload(const Workload& w,
                                         const std::vector<std::uint8_t>& key,
                                         std::uint64_t batchLimit) {
  ProverSession session(
      ProverConfig{key, {}, batchLimit, w.db.algo()}, w.db.checkpoints());
  std::vector<PartialReport> reports;
  replay_trace(session, w.trace,
               [&](const PartialReport& r) { reports.push_back(r); });
  return reports;
}

} // namespace

BenchResult bench_attestation(const Workload& w,
                              const std::vector<std::uint8_t>& key, int runs,
                              std::uint64_t batchLimit) {
  std::vector<double> rates;
  for (int i = 0; i < runs; ++i) {
    ProverSession session(
        ProverConfig{key, {}, batchLimit, w.db.algo()}, w.db.checkpoints());
    auto t0 = Clock::now();
    std::uint64_t measurements = 0;
    replay_trace(session, w.trace, [&](const PartialReport& r) {
      measurements += r.measurements.size();
    });
    rates.push_back(static_cast<double>(measurements) / seconds_since(t0));
  }
  return summarize("attestation", "throughput", "measurements_per_s",
                   std::move(rates), w.seed, w.params);
}

BenchResult bench_verification(const Workload& w,
                               const std::vector<std::uint8_t>& key, int runs,
                               std::uint64_t batchLimit) {
  auto reports = seal_workload(w, key, batchLimit);
  std::vector<double> rates;
  for (int i = 0; i < runs; ++i) {
    VerifierSession session(key, {}, w.db);
    auto t0 = Clock::now();
    for (const auto& report : reports) {
      if (auto v = session.verify_report(report)) {
        throw SpecError("benchmark stream failed verification: " +
                        render_violation(*v));
      }
    }
    rates.push_back(static_cast<double>(session.measurements_accepted()) /
                    seconds_since(t0));
  }
  return summarize("verification", "throughput", "measurements_per_s",
                   std::move(rates), w.seed, w.params);
}

std::vector<BenchResult> bench_codecs(const Workload& w,
                                      const std::vector<std::uint8_t>& key,
                                      const std::vector<Codec>& codecs,
                                      std::uint64_t batchLimit) {
  auto reports = seal_workload(w, key, batchLimit);
  std::uint64_t rawBytes = 0;
  for (const auto& r : reports) {
    rawBytes += encode_message_payload(Message{r}).size();
  }

  std::vector<BenchResult> out;
  std::string base = w.params + " batch=" + std::to_string(batchLimit) +
                     " reports=" + std::to_string(reports.size());
  out.push_back(summarize("network", "raw_payload_bytes", "bytes",
                          {static_cast<double>(rawBytes)}, w.seed, base));
  for (Codec codec : codecs) {
    std::uint64_t wireBytes = 0;
    double elapsed = 0;
    for (const auto& r : reports) {
      auto payload = encode_message_payload(Message{r});
      auto t0 = Clock::now();
      auto packed = compress_payload(payload, codec);
      elapsed += seconds_since(t0);
      wireBytes += packed.size();
      auto unpacked = decompress_payload(packed, codec);
      if (unpacked != payload) throw SpecError("codec round-trip mismatch");
    }
    out.push_back(summarize("network", "wire_payload_bytes", "bytes",
                            {static_cast<double>(wireBytes)}, w.seed,
                            base + " codec=" + codec_name(codec)));
    out.push_back(summarize("network", "compress_time", "s", {elapsed}, w.seed,
                            base + " codec=" + codec_name(codec)));
  }
  return out;
}

std::vector<BenchResult> bench_batching(const Workload& w,
                                        const std::vector<std::uint8_t>& key,
                                        const std::vector<std::uint64_t>& batches) {
  std::vector<BenchResult> out;
  for (std::uint64_t batch : batches) {
    auto reports = seal_workload(w, key, batch);
    std::uint64_t measurementBytes = 0;
    std::uint64_t frameBytes = 0;
    std::uint64_t measurements = 0;
    for (const auto& r : reports) {
      // Bytes spent on the measurements themselves, minus the fixed
      // per-report framing (header, index, thread id, count, fingerprint).
      auto payload = encode_message_payload(Message{r});
      auto frame = encode_frame(Message{r}, Codec::None);
      measurements += r.measurements.size();
      measurementBytes += payload.size() - (8 + 8 + 4 + 32);
      frameBytes += frame.size();
    }
    std::string params = w.params + " batch=" + std::to_string(batch) +
                         " reports=" + std::to_string(reports.size()) +
                         " measurements=" + std::to_string(measurements);
    out.push_back(summarize("batching", "measurement_bytes", "bytes",
                            {static_cast<double>(measurementBytes)}, w.seed,
                            params));
    out.push_back(summarize("batching", "frame_bytes", "bytes",
                            {static_cast<double>(frameBytes)}, w.seed, params));
  }
  return out;
}

std::vector<BenchResult> bench_shadow_depth(const Workload& w,
                                            const std::vector<std::uint8_t>& key,
                                            std::uint64_t batchLimit) {
  auto reports = seal_workload(w, key, batchLimit);
  VerifierSession session(key, {}, w.db);
  std::uint64_t maxDepth = 0;
  double depthSum = 0;
  std::uint64_t depthSamples = 0;
  std::vector<double> edgesPerMeasurement;
  for (const auto& report : reports) {
    if (auto v = session.verify_report(report)) {
      throw SpecError("benchmark stream failed verification: " +
                      render_violation(*v));
    }
    for (const auto& m : report.measurements) {
      const auto* entry = session.db().lookup({m.cpA, m.cpB, m.loaHash});
      edgesPerMeasurement.push_back(
          entry ? static_cast<double>(entry->callRetSubset.size()) : 0.0);
    }
    const auto* st = session.thread_state(report.threadId);
    std::uint64_t depth = st ? st->shadow.stack.size() : 0;
    maxDepth = std::max(maxDepth, depth);
    depthSum += static_cast<double>(depth);
    ++depthSamples;
  }
  std::string params =
      w.params + " reports=" + std::to_string(reports.size());
  std::vector<BenchResult> out;
  out.push_back(summarize("shadow_stack", "call_ret_edges_per_measurement",
                          "edges", edgesPerMeasurement, w.seed, params));
  out.push_back(summarize("shadow_stack", "max_depth", "frames",
                          {static_cast<double>(maxDepth)}, w.seed, params));
  out.push_back(summarize("shadow_stack", "mean_depth", "frames",
                          {depthSamples ? depthSum / depthSamples : 0.0},
                          w.seed, params));
  return out;
}

PartialReport synthetic_batch(std::size_t measurements, std::size_t distinct,
                              HashAlgo algo) {
  if (distinct == 0 || measurements == 0) {
    throw SpecError("synthetic batch needs at least one measurement");
  }
  std::vector<OnlineMeasurement> pool;
  pool.reserve(distinct);
  for (std::size_t i = 0; i < distinct; ++i) {
    OnlineMeasurement m;
    m.cpA = "F" + std::to_string(i % 7) + "B" + std::to_string(i);
    m.cpB = "F" + std::to_string(i % 7) + "B" + std::to_string(i + 1);
    std::string seed = "loa-" + std::to_string(i);
    m.loaHash = hash_bytes(
        std::vector<std::uint8_t>(seed.begin(), seed.end()), algo);
    pool.push_back(std::move(m));
  }
  PartialReport report;
  report.threadId = 1;
  report.measurements.reserve(measurements);
  // Loop iterations hit the same triplet back to back, so lay the batch out
  // as runs over the pool rather than shuffling it.
  std::size_t runLength = (measurements + distinct - 1) / distinct;
  for (std::size_t i = 0; report.measurements.size() < measurements; ++i) {
    const auto& m = pool[(i / runLength) % distinct];
    report.measurements.push_back(m);
  }
  return report;
}

std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  out << "scenario,metric,unit,runs,mean,stddev,median,seed,params\n";
  for (const auto& r : results) {
    std::string params = r.params;
    std::replace(params.begin(), params.end(), ',', ';');
    out << r.scenario << ',' << r.metric << ',' << r.unit << ',' << r.runs
        << ',' << r.mean << ',' << r.stddev << ',' << r.median << ',' << r.seed
        << ',' << params << '\n';
  }
  return out.str();
}

} // namespace scarr
