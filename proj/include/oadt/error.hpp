// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace oadt {

/// Categories of checked failures. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  kShape,          // tensor extents disagree
  kContract,       // precondition violated by the caller
  kNumeric,        // NaN/Inf encountered
  kIo,             // missing or unreadable file
  kBadMagic,
  kVersion,
  kTruncated,
  kDimension,      // header and payload disagree, or mixed dims in a dataset
  kEmpty,          // T == 0 or similar emptiness violations
  kParse,          // malformed text document
  kValidation,     // well-formed document with out-of-range values
  kConfig,         // unknown key, bad type, or config mismatch
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace oadt
