#pragma once

#include <stdexcept>
#include <string>

namespace scarr {

// Raised when an input document (CFG, trace, attack spec, DB file) is
// malformed or violates a structural invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an operation is invoked outside its contract (bad arguments,
// wrong order of calls), as opposed to bad input data.
struct SpecError : std::logic_error {
  explicit SpecError(const std::string& what) : std::logic_error(what) {}
};

// Raised when a wire frame cannot be parsed.
struct FrameError : std::runtime_error {
  explicit FrameError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when payload compression or decompression fails.
struct CodecError : std::runtime_error {
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on socket-level failures.
struct NetError : std::runtime_error {
  explicit NetError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace scarr
