#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "scarr/measurement_db.hpp"
#include "scarr/prover.hpp"
#include "scarr/verifier.hpp"
#include "scarr/wire.hpp"

namespace scarr {

constexpr std::uint16_t kDefaultPort = 7411;

struct ServerConfig {
  std::string bindAddr = "127.0.0.1";
  std::uint16_t port = kDefaultPort; // 0 picks an ephemeral port
  std::vector<std::uint8_t> key;
  std::vector<std::uint8_t> challengeInput;
  // Fixed nonce for reproducible runs; a fresh random nonce per session
  // otherwise.
  std::optional<std::array<std::uint8_t, 16>> fixedNonce;
  // Stop accepting after this many sessions (0 = unlimited).
  std::uint64_t maxSessions = 0;
};

// Attestation service: accepts prover connections, issues a challenge per
// session, verifies the report stream, answers each report with an Ack or a
// terminating Alarm.
class VerifierServer {
 public:
  VerifierServer(ServerConfig config, const MeasurementsDb& db);
  ~VerifierServer();

  VerifierServer(const VerifierServer&) = delete;
  VerifierServer& operator=(const VerifierServer&) = delete;

  void start();
  void stop();
  void wait(); // until the accept loop exits (maxSessions reached or stop())

  std::uint16_t port() const { return port_; }

  struct SessionRecord {
    std::uint64_t reports = 0;
    std::uint64_t measurements = 0;
    std::optional<Violation> violation;
    std::vector<std::uint8_t> output;
    bool sawOutput = false;
  };

  // Invoked after each session ends (from the session's thread).
  std::function<void(const SessionRecord&)> onSession;

 private:
  void accept_loop();
  void serve_client(int fd);

  ServerConfig config_;
  const MeasurementsDb* db_;
  int listenFd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptThread_;
  std::vector<std::thread> workers_;
};

struct ClientConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
  std::vector<std::uint8_t> key;
  Codec codec = Codec::None;
  std::uint64_t batchLimit = 50000;
  HashAlgo algo = HashAlgo::Blake2b256;
};

struct ClientSummary {
  std::uint64_t events = 0;
  std::uint64_t measurements = 0;
  std::uint64_t reports = 0;
  std::uint64_t acks = 0;
  std::uint64_t rawPayloadBytes = 0;  // report payloads before compression
  std::uint64_t wirePayloadBytes = 0; // report payloads as sent
  std::vector<std::uint8_t> challengeInput;
  std::optional<std::string> alarmLine; // set if the verifier rejected us
};

// Prover side of one attestation session: connect, receive the challenge,
// stream the trace's reports (waiting for each Ack), finish with Output.
ClientSummary run_prover_client(const ClientConfig& config,
                                const MeasurementsDb& db,
                                const std::vector<TraceEvent>& trace,
                                std::vector<std::uint8_t> output);

// Same exchange over an in-memory report stream (no prover session): used
// by attack drivers that replay pre-built or mutated reports.
ClientSummary run_report_stream_client(const ClientConfig& config,
                                       const std::vector<PartialReport>& reports,
                                       std::vector<std::uint8_t> output);

} // namespace scarr
