#include <cstring>
#include <limits>

#include <lzma.h>
#include <zlib.h>

#include "codec_compat.hpp"
#include "scarr/errors.hpp"
#include "scarr/wire.hpp"

namespace scarr {

namespace {

constexpr std::uint64_t kMaxRawSize = 1ull << 30;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint64_t get_u64(std::span<const std::uint8_t> in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> zlib_compress(std::span<const std::uint8_t> raw) {
  uLongf cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(cap);
  int rc = compress2(out.data(), &cap, raw.data(),
                     static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw CodecError("deflate compression failed");
  out.resize(cap);
  return out;
}

std::vector<std::uint8_t> zlib_decompress(std::span<const std::uint8_t> data,
                                          std::uint64_t rawSize) {
  std::vector<std::uint8_t> out(rawSize);
  uLongf len = static_cast<uLongf>(rawSize);
  int rc = uncompress(out.data(), &len, data.data(),
                      static_cast<uLong>(data.size()));
  if (rc != Z_OK || len != rawSize) {
    throw CodecError("deflate decompression failed");
  }
  return out;
}

std::vector<std::uint8_t> lzma_compress_buf(std::span<const std::uint8_t> raw) {
  std::size_t cap = lzma_stream_buffer_bound(raw.size());
  std::vector<std::uint8_t> out(cap);
  std::size_t pos = 0;
  lzma_ret rc = lzma_easy_buffer_encode(6, LZMA_CHECK_CRC32, nullptr,
                                        raw.data(), raw.size(), out.data(),
                                        &pos, cap);
  if (rc != LZMA_OK) throw CodecError("lzma compression failed");
  out.resize(pos);
  return out;
}

std::vector<std::uint8_t> lzma_decompress_buf(std::span<const std::uint8_t> data,
                                              std::uint64_t rawSize) {
  std::vector<std::uint8_t> out(rawSize);
  std::uint64_t memlimit = std::numeric_limits<std::uint64_t>::max();
  std::size_t inPos = 0, outPos = 0;
  lzma_ret rc =
      lzma_stream_buffer_decode(&memlimit, 0, nullptr, data.data(), &inPos,
                                data.size(), out.data(), &outPos, out.size());
  if (rc != LZMA_OK || outPos != rawSize) {
    throw CodecError("lzma decompression failed");
  }
  return out;
}

std::vector<std::uint8_t> bz2_compress(std::span<const std::uint8_t> raw) {
  if (raw.size() > std::numeric_limits<unsigned>::max() / 2) {
    throw CodecError("payload too large for bz2");
  }
  unsigned cap = static_cast<unsigned>(raw.size() + raw.size() / 100 + 600);
  std::vector<std::uint8_t> out(cap);
  int rc = BZ2_bzBuffToBuffCompress(
      reinterpret_cast<char*>(out.data()), &cap,
      const_cast<char*>(reinterpret_cast<const char*>(raw.data())),
      static_cast<unsigned>(raw.size()), 9, 0, 0);
  if (rc != 0) throw CodecError("bz2 compression failed");
  out.resize(cap);
  return out;
}

std::vector<std::uint8_t> bz2_decompress(std::span<const std::uint8_t> data,
                                         std::uint64_t rawSize) {
  std::vector<std::uint8_t> out(rawSize);
  unsigned len = static_cast<unsigned>(rawSize);
  int rc = BZ2_bzBuffToBuffDecompress(
      reinterpret_cast<char*>(out.data()), &len,
      const_cast<char*>(reinterpret_cast<const char*>(data.data())),
      static_cast<unsigned>(data.size()), 0, 0);
  if (rc != 0 || len != rawSize) throw CodecError("bz2 decompression failed");
  return out;
}

std::vector<std::uint8_t> zstd_compress(std::span<const std::uint8_t> raw) {
  std::size_t cap = ZSTD_compressBound(raw.size());
  std::vector<std::uint8_t> out(cap);
  std::size_t n = ZSTD_compress(out.data(), cap, raw.data(), raw.size(), 3);
  if (ZSTD_isError(n)) throw CodecError("zstd compression failed");
  out.resize(n);
  return out;
}

std::vector<std::uint8_t> zstd_decompress(std::span<const std::uint8_t> data,
                                          std::uint64_t rawSize) {
  std::vector<std::uint8_t> out(rawSize);
  std::size_t n = ZSTD_decompress(out.data(), out.size(), data.data(),
                                  data.size());
  if (ZSTD_isError(n) || n != rawSize) {
    throw CodecError("zstd decompression failed");
  }
  return out;
}

} // namespace

Codec codec_from_name(const std::string& name) {
  if (name == "none") return Codec::None;
  if (name == "zip") return Codec::Zip;
  if (name == "lzma") return Codec::Lzma;
  if (name == "bz2") return Codec::Bz2;
  if (name == "zstd") return Codec::Zstd;
  throw ValidationError("unknown codec: " + name);
}

std::string codec_name(Codec codec) {
  switch (codec) {
    case Codec::None: return "none";
    case Codec::Zip: return "zip";
    case Codec::Lzma: return "lzma";
    case Codec::Bz2: return "bz2";
    case Codec::Zstd: return "zstd";
  }
  throw SpecError("bad codec value");
}

std::vector<std::uint8_t> compress_payload(std::span<const std::uint8_t> raw,
                                           Codec codec) {
  if (codec == Codec::None) {
    return std::vector<std::uint8_t>(raw.begin(), raw.end());
  }
  if (raw.size() > kMaxRawSize) throw CodecError("payload too large");
  std::vector<std::uint8_t> out;
  put_u64(out, raw.size());
  // Zero-length payloads skip the codec body entirely; the libraries do not
  // all accept null buffers.
  if (raw.empty()) return out;
  std::vector<std::uint8_t> packed;
  switch (codec) {
    case Codec::Zip: packed = zlib_compress(raw); break;
    case Codec::Lzma: packed = lzma_compress_buf(raw); break;
    case Codec::Bz2: packed = bz2_compress(raw); break;
    case Codec::Zstd: packed = zstd_compress(raw); break;
    case Codec::None: break;
  }
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

std::vector<std::uint8_t> decompress_payload(std::span<const std::uint8_t> data,
                                             Codec codec) {
  if (codec == Codec::None) {
    return std::vector<std::uint8_t>(data.begin(), data.end());
  }
  if (data.size() < 8) throw CodecError("compressed payload truncated");
  std::uint64_t rawSize = get_u64(data);
  if (rawSize > kMaxRawSize) throw CodecError("declared raw size too large");
  auto body = data.subspan(8);
  if (rawSize == 0) {
    if (!body.empty()) throw CodecError("unexpected bytes after empty payload");
    return {};
  }
  switch (codec) {
    case Codec::Zip: return zlib_decompress(body, rawSize);
    case Codec::Lzma: return lzma_decompress_buf(body, rawSize);
    case Codec::Bz2: return bz2_decompress(body, rawSize);
    case Codec::Zstd: return zstd_decompress(body, rawSize);
    case Codec::None: break;
  }
  throw SpecError("bad codec value");
}

} // namespace scarr
