#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "scarr/cfg.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/prover.hpp"

namespace scarr {

// Knobs for the structured random program generator. Programs are built
// from nested-free segments (straight-line, diamond, while loop, call,
// exit point, guarded self-recursion) so every generated walk terminates
// with probability 1 and the enumeration stays finite.
struct SynthParams {
  std::uint64_t seed = 1;
  int functions = 3;          // upper bound, >= 1
  int segments = 4;           // per-function upper bound, >= 1
  double diamondProb = 0.30;
  double loopProb = 0.25;
  double callProb = 0.30;
  double exitPointProb = 0.15;
  double recursionProb = 0.15; // guarded self-call, non-main functions
  int threads = 1;
  std::size_t walkSteps = 20000; // per-walk safety cap
};

// Random structured CFG: entry/exit annotated, calls form a DAG plus
// guarded self-recursion; callees return to every caller's continuation.
Cfg random_cfg(const SynthParams& params, std::mt19937_64& rng);

// Machine-faithful random walk: follows real call/return semantics with an
// explicit continuation stack, crossing every annotated node it visits.
// Emits checkpoint crossings and significant edge traversals.
std::vector<TraceEvent> random_walk(const Cfg& cfg, std::uint64_t threadId,
                                    std::mt19937_64& rng,
                                    std::size_t maxSteps = 20000);

// Random interleaving of per-thread walks that preserves each thread's own
// event order.
std::vector<TraceEvent> interleave_walks(std::vector<std::vector<TraceEvent>> walks,
                                         std::mt19937_64& rng);

struct Workload {
  Cfg cfg; // checkpoint-identified
  MeasurementsDb db;
  std::vector<TraceEvent> trace;
  std::uint64_t seed = 0;
  std::string params; // human-readable generator settings
};

// Full pipeline over a random program: generate, identify checkpoints,
// enumerate, build the DB, and produce a multi-thread honest trace.
Workload build_workload(const SynthParams& params,
                        HashAlgo algo = HashAlgo::Blake2b256);

} // namespace scarr
