#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "scarr/attack.hpp"
#include "scarr/bench.hpp"
#include "scarr/cfg.hpp"
#include "scarr/errors.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/net.hpp"
#include "scarr/prover.hpp"
#include "scarr/synth.hpp"
#include "scarr/verifier.hpp"
#include "scarr/wire.hpp"

namespace {

using namespace scarr;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::uint8_t> key_from_env() {
  const char* hex = std::getenv("SCARR_KEY_HEX");
  if (!hex || !*hex) {
    throw ValidationError(
        "SCARR_KEY_HEX is not set; export the shared attestation key as hex");
  }
  auto key = from_hex(hex);
  if (key.empty()) throw ValidationError("SCARR_KEY_HEX decodes to nothing");
  return key;
}

std::array<std::uint8_t, 16> nonce_from_hex(const std::string& hex) {
  auto bytes = from_hex(hex);
  if (bytes.size() != 16) {
    throw ValidationError("nonce must be exactly 16 bytes (32 hex digits)");
  }
  std::array<std::uint8_t, 16> nonce{};
  std::copy(bytes.begin(), bytes.end(), nonce.begin());
  return nonce;
}

struct GenArgs {
  std::string cfgPath, outPath, hashName = "blake2b256";
  bool print = false;
};

int cmd_gen(const GenArgs& a) {
  HashAlgo algo = hash_algo_from_name(a.hashName);
  std::string text = read_file(a.cfgPath);
  Cfg cfg = identify_checkpoints(load_cfg(text));
  auto entries = enumerate_loas(cfg, algo);
  auto retTo = compute_ret_to(cfg, entries);
  Digest programId = hash_bytes(
      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
      algo);
  MeasurementsDb db = build_db(cfg, entries, retTo, programId, algo);
  db.save_file(a.outPath);

  std::cout << "entries=" << db.size() << " ret_to=" << db.ret_to_size()
            << " checkpoints=" << db.checkpoints().size()
            << " program_id=" << to_hex(programId)
            << " algo=" << hash_algo_name(algo) << "\n";
  if (a.print) {
    for (const auto& m : db.entries()) {
      std::cout << "MEASUREMENT cpA=" << m.key.cpA << " cpB=" << m.key.cpB
                << " loa=" << to_hex(m.key.loaHash)
                << " call_ret=" << m.callRetSubset.size() << "\n";
    }
  }
  return 0;
}

struct InspectArgs {
  std::string dbPath, cfgPath;
};

int cmd_inspect(const InspectArgs& a) {
  if (a.dbPath.empty() == a.cfgPath.empty()) {
    throw ValidationError("inspect needs exactly one of --db or --cfg");
  }
  if (!a.dbPath.empty()) {
    MeasurementsDb db = MeasurementsDb::load_file(a.dbPath);
    std::cout << "entries=" << db.size() << " ret_to=" << db.ret_to_size()
              << " checkpoints=" << db.checkpoints().size()
              << " program_id=" << to_hex(db.program_id())
              << " algo=" << hash_algo_name(db.algo()) << "\n";
    for (const auto& [label, kind] : db.checkpoints()) {
      std::cout << "CHECKPOINT node=" << label
                << " kind=" << checkpoint_kind_name(kind) << "\n";
    }
    for (const auto& m : db.entries()) {
      std::cout << "MEASUREMENT cpA=" << m.key.cpA << " cpB=" << m.key.cpB
                << " loa=" << to_hex(m.key.loaHash)
                << " call_ret=" << m.callRetSubset.size() << "\n";
    }
    for (const auto& [retKey, calls] : db.ret_to()) {
      for (const Edge& call : calls) {
        std::cout << "RETTO ret=" << retKey.first << "->" << retKey.second
                  << " call=" << call.src << "->" << call.dst << "\n";
      }
    }
  } else {
    Cfg cfg = identify_checkpoints(load_cfg(read_file(a.cfgPath)));
    std::cout << "nodes=" << cfg.nodes().size() << " edges=" << cfg.edges().size()
              << " entry=" << cfg.entry() << "\n";
    for (const auto& label : cfg.checkpoint_labels()) {
      std::cout << "CHECKPOINT node=" << label
                << " kind=" << checkpoint_kind_name(cfg.checkpoint(label))
                << "\n";
    }
  }
  return 0;
}

struct ServeArgs {
  std::string dbPath, bind = "127.0.0.1", inputHex, nonceHex;
  std::uint16_t port = kDefaultPort;
  std::uint64_t maxSessions = 1;
};

int cmd_serve(const ServeArgs& a) {
  MeasurementsDb db = MeasurementsDb::load_file(a.dbPath);
  ServerConfig config;
  config.bindAddr = a.bind;
  config.port = a.port;
  config.key = key_from_env();
  config.challengeInput = from_hex(a.inputHex);
  if (!a.nonceHex.empty()) config.fixedNonce = nonce_from_hex(a.nonceHex);
  config.maxSessions = a.maxSessions;

  VerifierServer server(std::move(config), db);
  std::mutex mu;
  bool anyViolation = false;
  server.onSession = [&](const VerifierServer::SessionRecord& record) {
    std::lock_guard<std::mutex> lock(mu);
    if (record.violation) {
      anyViolation = true;
      std::cout << render_violation(*record.violation) << "\n";
    }
    std::cout << "SESSION outcome=" << (record.violation ? "violation" : "ok")
              << " reports=" << record.reports
              << " measurements=" << record.measurements
              << " output_bytes=" << record.output.size() << std::endl;
  };
  server.start();
  std::cerr << "listening on " << a.bind << ":" << server.port() << "\n";
  server.wait();
  server.stop();
  return anyViolation ? 1 : 0;
}

struct ProveArgs {
  std::string dbPath, tracePath, host = "127.0.0.1", codecName = "none",
              outputHex;
  std::uint16_t port = kDefaultPort;
  std::uint64_t batch = 50000;
};

int cmd_prove(const ProveArgs& a) {
  MeasurementsDb db = MeasurementsDb::load_file(a.dbPath);
  auto trace = load_trace_file(a.tracePath);
  ClientConfig config;
  config.host = a.host;
  config.port = a.port;
  config.key = key_from_env();
  config.codec = codec_from_name(a.codecName);
  config.batchLimit = a.batch;
  config.algo = db.algo();

  ClientSummary s = run_prover_client(config, db, trace, from_hex(a.outputHex));
  if (s.alarmLine) std::cout << *s.alarmLine << "\n";
  std::cout << "PROVE reports=" << s.reports << " acks=" << s.acks
            << " measurements=" << s.measurements << " events=" << s.events
            << " raw_bytes=" << s.rawPayloadBytes
            << " wire_bytes=" << s.wirePayloadBytes << std::endl;
  return s.alarmLine ? 1 : 0;
}

struct AttackArgs {
  std::string cfgPath, dbPath, tracePath, specPath, expectName,
      nonceHex = "00000000000000000000000000000000";
  std::uint64_t batch = 50000;
};

int cmd_attack(const AttackArgs& a) {
  Cfg cfg = identify_checkpoints(load_cfg(read_file(a.cfgPath)));
  MeasurementsDb db = MeasurementsDb::load_file(a.dbPath);
  auto trace = load_trace_file(a.tracePath);
  AttackSpec spec = load_attack_spec_file(a.specPath);
  auto key = key_from_env();
  auto nonce = nonce_from_hex(a.nonceHex);

  ViolationKind expected = expected_violation(spec.kind);
  if (spec.expect) expected = *spec.expect;
  if (!a.expectName.empty()) {
    bool found = false;
    for (auto kind : {ViolationKind::Integrity, ViolationKind::Replay,
                      ViolationKind::UnknownMeasurement, ViolationKind::ChainBreak,
                      ViolationKind::ShadowStackMismatch, ViolationKind::Underflow}) {
      if (violation_kind_name(kind) == a.expectName) {
        expected = kind;
        found = true;
      }
    }
    if (!found) throw ValidationError("unknown violation kind: " + a.expectName);
  }

  AttackRun run = run_attack(cfg, db, trace, spec, key, nonce, a.batch);
  if (run.observed) {
    std::cout << render_violation(*run.observed) << "\n";
  } else {
    std::cout << "NO VIOLATION\n";
  }
  bool match = run.observed && run.observed->kind == expected;
  std::cout << "ATTACK kind=" << attack_kind_name(spec.kind)
            << " expected=" << violation_kind_name(expected) << " observed="
            << (run.observed ? violation_kind_name(run.observed->kind)
                             : std::string("none"))
            << " accepted_reports=" << run.reportsAccepted
            << " match=" << (match ? 1 : 0) << std::endl;
  return match ? 0 : 1;
}

struct BenchArgs {
  std::string scenario = "all", outPath;
  std::uint64_t seed = 1;
  int functions = 4;
  int segments = 6;
  int threads = 2;
  int runs = 10;
  std::uint64_t batch = 50000;
};

int cmd_bench(const BenchArgs& a) {
  SynthParams params;
  params.seed = a.seed;
  params.functions = a.functions;
  params.segments = a.segments;
  params.threads = a.threads;
  Workload w = build_workload(params);

  std::vector<std::uint8_t> key;
  if (const char* hex = std::getenv("SCARR_KEY_HEX"); hex && *hex) {
    key = from_hex(hex);
  } else {
    key.assign(32, 0x42);
  }

  std::vector<BenchResult> results;
  bool all = a.scenario == "all";
  if (all || a.scenario == "attest") {
    results.push_back(bench_attestation(w, key, a.runs, a.batch));
  }
  if (all || a.scenario == "verify") {
    results.push_back(bench_verification(w, key, a.runs, a.batch));
  }
  if (all || a.scenario == "network") {
    auto rows = bench_codecs(w, key,
                             {Codec::None, Codec::Zip, Codec::Lzma, Codec::Bz2,
                              Codec::Zstd},
                             a.batch);
    results.insert(results.end(), rows.begin(), rows.end());
  }
  if (all || a.scenario == "batching") {
    auto rows = bench_batching(w, key, {1, a.batch});
    results.insert(results.end(), rows.begin(), rows.end());
  }
  if (all || a.scenario == "shadow") {
    auto rows = bench_shadow_depth(w, key, a.batch);
    results.insert(results.end(), rows.begin(), rows.end());
  }
  if (results.empty()) {
    throw ValidationError("unknown scenario: " + a.scenario);
  }

  std::string csv = bench_csv(results);
  if (a.outPath.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(a.outPath);
    if (!out) throw ValidationError("cannot open output file: " + a.outPath);
    out << csv;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"control-flow attestation toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* genCmd =
      app.add_subcommand("gen-measurements",
                         "build the measurements DB from a CFG document");
  genCmd->add_option("--cfg", gen.cfgPath, "CFG JSON document")->required();
  genCmd->add_option("--out", gen.outPath, "output DB path")->required();
  genCmd->add_option("--hash", gen.hashName, "hash algorithm (blake2b256|sha256)");
  genCmd->add_flag("--print", gen.print, "list the DB entries");

  InspectArgs inspect;
  auto* inspectCmd =
      app.add_subcommand("inspect", "print a measurements DB or CFG summary");
  inspectCmd->add_option("--db", inspect.dbPath, "measurements DB path");
  inspectCmd->add_option("--cfg", inspect.cfgPath, "CFG JSON document");

  ServeArgs serve;
  auto* serveCmd = app.add_subcommand("serve", "run the verifier service");
  serveCmd->add_option("--db", serve.dbPath, "measurements DB path")->required();
  serveCmd->add_option("--bind", serve.bind, "bind address");
  serveCmd->add_option("--port", serve.port, "TCP port (default 7411)");
  serveCmd->add_option("--input-hex", serve.inputHex, "challenge input bytes");
  serveCmd->add_option("--nonce-hex", serve.nonceHex,
                       "fixed 16-byte challenge nonce (testing only)");
  serveCmd->add_option("--max-sessions", serve.maxSessions,
                       "sessions to serve before exiting (default 1)");

  ProveArgs prove;
  auto* proveCmd =
      app.add_subcommand("prove", "attest a trace against a verifier");
  proveCmd->add_option("--db", prove.dbPath, "measurements DB path")->required();
  proveCmd->add_option("--trace", prove.tracePath, "trace file")->required();
  proveCmd->add_option("--host", prove.host, "verifier host");
  proveCmd->add_option("--port", prove.port, "verifier port (default 7411)");
  proveCmd->add_option("--codec", prove.codecName,
                       "payload codec (none|zip|lzma|bz2|zstd)");
  proveCmd->add_option("--batch", prove.batch, "measurements per report");
  proveCmd->add_option("--output-hex", prove.outputHex,
                       "program output bytes to send at session end");

  AttackArgs attack;
  auto* attackCmd =
      app.add_subcommand("attack", "apply an attack spec and verify locally");
  attackCmd->add_option("--cfg", attack.cfgPath, "CFG JSON document")->required();
  attackCmd->add_option("--db", attack.dbPath, "measurements DB path")->required();
  attackCmd->add_option("--trace", attack.tracePath, "honest trace file")
      ->required();
  attackCmd->add_option("--spec", attack.specPath, "attack spec JSON")->required();
  attackCmd->add_option("--expect", attack.expectName,
                        "violation kind the attack must trigger");
  attackCmd->add_option("--nonce-hex", attack.nonceHex, "16-byte session nonce");
  attackCmd->add_option("--batch", attack.batch, "measurements per report");

  BenchArgs bench;
  auto* benchCmd = app.add_subcommand("bench", "run benchmarks, CSV to stdout");
  benchCmd->add_option("--scenario", bench.scenario,
                       "all|attest|verify|network|batching|shadow");
  benchCmd->add_option("--seed", bench.seed, "workload seed");
  benchCmd->add_option("--functions", bench.functions, "max functions");
  benchCmd->add_option("--segments", bench.segments, "max segments per function");
  benchCmd->add_option("--threads", bench.threads, "walker threads");
  benchCmd->add_option("--runs", bench.runs, "timing repetitions");
  benchCmd->add_option("--batch", bench.batch, "measurements per report");
  benchCmd->add_option("--out", bench.outPath, "write CSV here instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (genCmd->parsed()) return cmd_gen(gen);
    if (inspectCmd->parsed()) return cmd_inspect(inspect);
    if (serveCmd->parsed()) return cmd_serve(serve);
    if (proveCmd->parsed()) return cmd_prove(prove);
    if (attackCmd->parsed()) return cmd_attack(attack);
    if (benchCmd->parsed()) return cmd_bench(bench);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
