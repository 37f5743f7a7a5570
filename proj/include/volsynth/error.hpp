#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace volsynth {

// Machine-readable failure categories. The CLI maps each category to its own
// exit status, so the numeric values are part of the command-line contract.
enum class ErrorCode {
  kMissingFile = 10,
  kMissingDateColumn = 11,
  kDuplicateDate = 12,
  kNonMonotoneDate = 13,
  kDateGap = 14,
  kMalformedInput = 15,
  kAllMissing = 20,
  kFillPolicy = 21,
  kBoundary = 22,
  kDomain = 30,
  kLengthMismatch = 31,
  kShape = 40,
  kNonFinite = 41,
  kFrameTooShort = 50,
  kConfig = 60,
  kIo = 70,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace volsynth
