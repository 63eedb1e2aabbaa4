#include "scarr/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>

#include "scarr/errors.hpp"

namespace scarr {

namespace {

bool send_all(int fd, const std::uint8_t* data, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && (errno == EINTR)) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool send_frame(int fd, const Message& msg, Codec codec) {
  auto frame = encode_frame(msg, codec);
  return send_all(fd, frame.data(), frame.size());
}

// 0 = clean EOF before any byte, 1 = got it, -1 = error/short read
int recv_exact(int fd, std::uint8_t* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n == 0) return got == 0 ? 0 : -1;
    if (n < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    got += static_cast<std::size_t>(n);
  }
  return 1;
}

// Reads one frame; nullopt on clean EOF. Throws on malformed data.
std::optional<DecodedFrame> read_frame(int fd) {
  std::vector<std::uint8_t> buf(kFrameHeaderSize);
  int rc = recv_exact(fd, buf.data(), buf.size());
  if (rc == 0) return std::nullopt;
  if (rc < 0) throw NetError("connection lost while reading frame header");
  std::size_t payloadLen = frame_payload_length(buf);
  buf.resize(kFrameHeaderSize + payloadLen);
  if (payloadLen &&
      recv_exact(fd, buf.data() + kFrameHeaderSize, payloadLen) != 1) {
    throw NetError("connection lost while reading frame payload");
  }
  return decode_frame(buf);
}

struct FdCloser {
  int fd;
  ~FdCloser() {
    if (fd >= 0) ::close(fd);
  }
};

} // namespace

VerifierServer::VerifierServer(ServerConfig config, const MeasurementsDb& db)
    : config_(std::move(config)), db_(&db) {
  if (config_.key.empty()) throw SpecError("server key must not be empty");
}

VerifierServer::~VerifierServer() { stop(); }

void VerifierServer::start() {
  if (running_.exchange(true)) throw SpecError("server already started");

  listenFd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listenFd_ < 0) throw NetError("socket() failed");
  int one = 1;
  ::setsockopt(listenFd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(config_.port);
  if (::inet_pton(AF_INET, config_.bindAddr.c_str(), &addr.sin_addr) != 1) {
    throw NetError("bad bind address: " + config_.bindAddr);
  }
  if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(listenFd_);
    listenFd_ = -1;
    running_ = false;
    throw NetError("bind failed on " + config_.bindAddr + ":" +
                   std::to_string(config_.port) + ": " + std::strerror(errno));
  }
  if (::listen(listenFd_, 16) < 0) {
    ::close(listenFd_);
    listenFd_ = -1;
    running_ = false;
    throw NetError("listen failed");
  }
  sockaddr_in bound{};
  socklen_t blen = sizeof(bound);
  ::getsockname(listenFd_, reinterpret_cast<sockaddr*>(&bound), &blen);
  port_ = ntohs(bound.sin_port);

  acceptThread_ = std::thread([this] { accept_loop(); });
}

void VerifierServer::accept_loop() {
  std::uint64_t served = 0;
  while (running_) {
    pollfd pfd{listenFd_, POLLIN, 0};
    int pr = ::poll(&pfd, 1, 100);
    if (pr < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (pr == 0) continue;
    int fd = ::accept(listenFd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    workers_.emplace_back([this, fd] { serve_client(fd); });
    if (config_.maxSessions && ++served >= config_.maxSessions) break;
  }
}

void VerifierServer::serve_client(int fd) {
  FdCloser closer{fd};
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  SessionRecord record;
  try {
    Challenge ch;
    ch.input = config_.challengeInput;
    ch.nonce = config_.fixedNonce ? *config_.fixedNonce : random_nonce();
    VerifierSession session(config_.key, ch.nonce, *db_);
    if (!send_frame(fd, ch, Codec::None)) return;

    while (true) {
      auto frame = read_frame(fd);
      if (!frame) break; // peer hung up
      if (auto* report = std::get_if<PartialReport>(&frame->msg)) {
        if (auto violation = session.verify_report(*report)) {
          record.violation = violation;
          send_frame(fd, AlarmMsg{render_violation(*violation)}, Codec::None);
          break;
        }
        ++record.reports;
        record.measurements += report->measurements.size();
        if (!send_frame(fd, AckMsg{report->index}, Codec::None)) break;
      } else if (auto* output = std::get_if<OutputMsg>(&frame->msg)) {
        record.output = output->data;
        record.sawOutput = true;
        break;
      } else {
        std::cerr << "verifier: unexpected message type from prover\n";
        break;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "verifier session error: " << e.what() << "\n";
  }
  if (onSession) onSession(record);
}

void VerifierServer::stop() {
  running_ = false;
  if (acceptThread_.joinable()) acceptThread_.join();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  workers_.clear();
  if (listenFd_ >= 0) {
    ::close(listenFd_);
    listenFd_ = -1;
  }
}

void VerifierServer::wait() {
  if (acceptThread_.joinable()) acceptThread_.join();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  workers_.clear();
}

namespace {

int connect_to(const std::string& host, std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw NetError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw NetError("bad host address: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw NetError("connect to " + host + ":" + std::to_string(port) +
                   " failed: " + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

ClientSummary run_session(
    const ClientConfig& config,
    const std::function<std::vector<PartialReport>(const Challenge&)>& makeReports,
    std::vector<std::uint8_t> output, ClientSummary& summary) {
  int fd = connect_to(config.host, config.port);
  FdCloser closer{fd};

  auto first = read_frame(fd);
  if (!first || !std::holds_alternative<Challenge>(first->msg)) {
    throw NetError("expected a challenge from the verifier");
  }
  const Challenge& ch = std::get<Challenge>(first->msg);
  summary.challengeInput = ch.input;

  auto reports = makeReports(ch);
  summary.reports = reports.size();
  for (const auto& r : reports) summary.measurements += r.measurements.size();

  for (const auto& report : reports) {
    auto payload = encode_message_payload(Message{report});
    auto frame = encode_frame(Message{report}, config.codec);
    summary.rawPayloadBytes += payload.size();
    summary.wirePayloadBytes += frame.size() - kFrameHeaderSize;
    if (!send_all(fd, frame.data(), frame.size())) {
      throw NetError("failed to send report");
    }
    auto reply = read_frame(fd);
    if (!reply) throw NetError("verifier hung up mid-session");
    if (auto* alarm = std::get_if<AlarmMsg>(&reply->msg)) {
      summary.alarmLine = alarm->line;
      return summary;
    }
    if (!std::holds_alternative<AckMsg>(reply->msg)) {
      throw NetError("unexpected reply to report");
    }
    ++summary.acks;
  }

  send_frame(fd, OutputMsg{std::move(output)}, config.codec);
  return summary;
}

} // namespace

ClientSummary run_prover_client(const ClientConfig& config,
                                const MeasurementsDb& db,
                                const std::vector<TraceEvent>& trace,
                                std::vector<std::uint8_t> output) {
  ClientSummary summary;
  auto makeReports = [&](const Challenge& ch) {
    ProverSession session(
        ProverConfig{config.key, ch.nonce, config.batchLimit, db.algo()},
        db.checkpoints());
    std::vector<PartialReport> reports;
    auto rs = replay_trace(session, trace,
                           [&](const PartialReport& r) { reports.push_back(r); });
    summary.events = rs.events;
    return reports;
  };
  return run_session(config, makeReports, std::move(output), summary);
}

ClientSummary run_report_stream_client(const ClientConfig& config,
                                       const std::vector<PartialReport>& reports,
                                       std::vector<std::uint8_t> output) {
  ClientSummary summary;
  auto makeReports = [&](const Challenge&) { return reports; };
  return run_session(config, makeReports, std::move(output), summary);
}

} // namespace scarr
