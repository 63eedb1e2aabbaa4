#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scarr/prover.hpp"
#include "scarr/verifier.hpp"

namespace scarr {

enum class MsgType : std::uint8_t {
  Challenge = 0x01,
  Report = 0x02,
  Output = 0x03,
  Alarm = 0x04,
  Ack = 0x05,
};

enum class Codec : std::uint8_t {
  None = 0x00,
  Zip = 0x01,
  Lzma = 0x02,
  Bz2 = 0x03,
  Zstd = 0x04,
};

Codec codec_from_name(const std::string& name);
std::string codec_name(Codec codec);

// Final program output returned to the verifier at the end of a session.
struct OutputMsg {
  std::vector<std::uint8_t> data;
  bool operator==(const OutputMsg&) const = default;
};

// Verifier-to-prover notification that a report was rejected; carries the
// rendered violation line.
struct AlarmMsg {
  std::string line;
  bool operator==(const AlarmMsg&) const = default;
};

// Verifier-to-prover acknowledgement of an accepted report.
struct AckMsg {
  std::uint64_t index = 0;
  bool operator==(const AckMsg&) const = default;
};

using Message = std::variant<Challenge, PartialReport, OutputMsg, AlarmMsg, AckMsg>;

MsgType message_type(const Message& msg);

// Compressed payload layout for every codec except None: u64 LE raw size
// followed by the codec's output. CodecError on failure or oversized data.
std::vector<std::uint8_t> compress_payload(std::span<const std::uint8_t> raw,
                                           Codec codec);
std::vector<std::uint8_t> decompress_payload(std::span<const std::uint8_t> data,
                                             Codec codec);

// Uncompressed message body encodings.
std::vector<std::uint8_t> encode_message_payload(const Message& msg);
Message decode_message_payload(MsgType type,
                               std::span<const std::uint8_t> payload);

// Frame layout: "SCRR", version 0x01, message type, codec, u32 LE payload
// length, payload. The header is never compressed.
constexpr std::size_t kFrameHeaderSize = 11;
constexpr std::uint8_t kWireVersion = 0x01;

std::vector<std::uint8_t> encode_frame(const Message& msg, Codec codec);

struct DecodedFrame {
  Message msg;
  Codec codec;
  std::size_t consumed = 0;
};

// Parses one complete frame from the front of the buffer. FrameError if the
// buffer does not hold a full well-formed frame.
DecodedFrame decode_frame(std::span<const std::uint8_t> buffer);

// Payload length promised by a frame header (for incremental socket reads).
std::size_t frame_payload_length(std::span<const std::uint8_t> header);

} // namespace scarr
