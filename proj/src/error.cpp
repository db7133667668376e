#include "frae/error.hpp"

namespace frae {

const char* to_string(BitstreamErrorKind kind) noexcept {
  switch (kind) {
    case BitstreamErrorKind::kBadMagic: return "bad magic";
    case BitstreamErrorKind::kVersionMismatch: return "version mismatch";
    case BitstreamErrorKind::kLengthMismatch: return "length mismatch";
    case BitstreamErrorKind::kInvalidField: return "invalid field";
    case BitstreamErrorKind::kPayloadExhausted: return "payload exhausted";
    case BitstreamErrorKind::kCorruptPayload: return "corrupt payload";
    case BitstreamErrorKind::kZeroProbability: return "zero probability";
    case BitstreamErrorKind::kInvalidTable: return "invalid table";
  }
  return "bitstream error";
}

}  // namespace frae
