#include "scarr/wire.hpp"

#include <cstring>

#include "scarr/errors.hpp"

namespace scarr {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'R', 'R'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Digest digest() {
    need(32);
    Digest d{};
    std::memcpy(d.data(), data_.data() + pos_, 32);
    pos_ += 32;
    return d;
  }

  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (data_.size() - pos_ < n) throw FrameError("message payload truncated");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

} // namespace

MsgType message_type(const Message& msg) {
  if (std::holds_alternative<Challenge>(msg)) return MsgType::Challenge;
  if (std::holds_alternative<PartialReport>(msg)) return MsgType::Report;
  if (std::holds_alternative<OutputMsg>(msg)) return MsgType::Output;
  if (std::holds_alternative<AlarmMsg>(msg)) return MsgType::Alarm;
  return MsgType::Ack;
}

std::vector<std::uint8_t> encode_message_payload(const Message& msg) {
  std::vector<std::uint8_t> out;
  if (const auto* ch = std::get_if<Challenge>(&msg)) {
    put_u32(out, static_cast<std::uint32_t>(ch->input.size()));
    out.insert(out.end(), ch->input.begin(), ch->input.end());
    out.insert(out.end(), ch->nonce.begin(), ch->nonce.end());
  } else if (const auto* report = std::get_if<PartialReport>(&msg)) {
    put_u64(out, report->index);
    auto body = serialize_report_body(*report);
    out.insert(out.end(), body.begin(), body.end());
    out.insert(out.end(), report->fingerprint.begin(),
               report->fingerprint.end());
  } else if (const auto* output = std::get_if<OutputMsg>(&msg)) {
    out = output->data;
  } else if (const auto* alarm = std::get_if<AlarmMsg>(&msg)) {
    out.assign(alarm->line.begin(), alarm->line.end());
  } else {
    put_u64(out, std::get<AckMsg>(msg).index);
  }
  return out;
}

Message decode_message_payload(MsgType type,
                               std::span<const std::uint8_t> payload) {
  Reader r(payload);
  switch (type) {
    case MsgType::Challenge: {
      Challenge ch;
      std::uint32_t n = r.u32();
      ch.input = r.bytes(n);
      auto nonce = r.bytes(16);
      std::copy(nonce.begin(), nonce.end(), ch.nonce.begin());
      if (r.remaining() != 0) throw FrameError("trailing bytes in challenge");
      return ch;
    }
    case MsgType::Report: {
      PartialReport report;
      report.index = r.u64();
      report.threadId = r.u64();
      std::uint32_t count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        OnlineMeasurement m;
        m.cpA = r.str();
        m.cpB = r.str();
        m.loaHash = r.digest();
        report.measurements.push_back(std::move(m));
      }
      report.fingerprint = r.digest();
      if (r.remaining() != 0) throw FrameError("trailing bytes in report");
      return report;
    }
    case MsgType::Output: {
      OutputMsg out;
      out.data.assign(payload.begin(), payload.end());
      return out;
    }
    case MsgType::Alarm: {
      AlarmMsg alarm;
      alarm.line.assign(payload.begin(), payload.end());
      return alarm;
    }
    case MsgType::Ack: {
      AckMsg ack;
      ack.index = r.u64();
      if (r.remaining() != 0) throw FrameError("trailing bytes in ack");
      return ack;
    }
  }
  throw FrameError("unknown message type");
}

std::vector<std::uint8_t> encode_frame(const Message& msg, Codec codec) {
  auto payload = compress_payload(encode_message_payload(msg), codec);
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + payload.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(message_type(msg)));
  out.push_back(static_cast<std::uint8_t>(codec));
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::size_t frame_payload_length(std::span<const std::uint8_t> header) {
  if (header.size() < kFrameHeaderSize) throw FrameError("frame header truncated");
  if (std::memcmp(header.data(), kMagic, 4) != 0) {
    throw FrameError("bad frame magic");
  }
  if (header[4] != kWireVersion) throw FrameError("unsupported frame version");
  if (header[5] < 0x01 || header[5] > 0x05) {
    throw FrameError("unknown message type");
  }
  if (header[6] > 0x04) throw FrameError("unknown codec");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) {
    len |= static_cast<std::uint32_t>(header[7 + i]) << (8 * i);
  }
  return len;
}

DecodedFrame decode_frame(std::span<const std::uint8_t> buffer) {
  std::size_t payloadLen = frame_payload_length(buffer);
  if (buffer.size() < kFrameHeaderSize + payloadLen) {
    throw FrameError("frame payload truncated");
  }
  MsgType type = static_cast<MsgType>(buffer[5]);
  Codec codec = static_cast<Codec>(buffer[6]);
  auto payload =
      decompress_payload(buffer.subspan(kFrameHeaderSize, payloadLen), codec);
  DecodedFrame out{decode_message_payload(type, payload), codec,
                   kFrameHeaderSize + payloadLen};
  return out;
}

} // namespace scarr
