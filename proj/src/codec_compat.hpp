#pragma once

// bz2 and zstd are present on this system only as versioned runtime
// libraries, without development headers. Both expose small, ABI-stable
// one-shot entry points; declaring them here and linking the runtime
// objects directly keeps the build self-contained.

#include <cstddef>

extern "C" {

int BZ2_bzBuffToBuffCompress(char* dest, unsigned* destLen, char* source,
                             unsigned sourceLen, int blockSize100k,
                             int verbosity, int workFactor);
int BZ2_bzBuffToBuffDecompress(char* dest, unsigned* destLen, char* source,
                               unsigned sourceLen, int small, int verbosity);

size_t ZSTD_compress(void* dst, size_t dstCapacity, const void* src,
                     size_t srcSize, int compressionLevel);
size_t ZSTD_decompress(void* dst, size_t dstCapacity, const void* src,
                       size_t compressedSize);
size_t ZSTD_compressBound(size_t srcSize);
unsigned ZSTD_isError(size_t code);

} // extern "C"
