#include "volsynth/error.hpp"

namespace volsynth {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kMissingDateColumn: return "missing-date-column";
    case ErrorCode::kDuplicateDate: return "duplicate-date";
    case ErrorCode::kNonMonotoneDate: return "non-monotone-date";
    case ErrorCode::kDateGap: return "date-gap";
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kAllMissing: return "all-missing";
    case ErrorCode::kFillPolicy: return "fill-policy";
    case ErrorCode::kBoundary: return "boundary";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kFrameTooShort: return "frame-too-short";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace volsynth
