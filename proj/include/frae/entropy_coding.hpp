#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "frae/prior.hpp"

namespace frae {

inline constexpr int kProbabilityBits = 16;
inline constexpr std::uint32_t kProbabilityTotal = 1u << kProbabilityBits;
/// Probabilities are floored here before quantization.
inline constexpr double kProbabilityFloor = 0x1p-32;

/// Cumulative frequency table with L+1 entries: cdf[0] = 0, cdf[L] = 2^16.
using CdfTable = std::vector<std::uint32_t>;

/// Deterministic 16-bit quantization: floor at 2^-32, renormalize, round
/// the scaled CDF half-to-even, then enforce strictly increasing entries by
/// minimal increments (forward pass) and decrements (backward pass).
CdfTable quantize_pmf(std::span<const double> pmf);

/// Throws BitstreamError(kInvalidTable) unless the table starts at 0, ends
/// at 2^16 and never decreases.
void validate_table(std::span<const std::uint32_t> cdf);

struct SymbolStream {
  std::vector<std::uint32_t> symbols;
  std::vector<CdfTable> tables;  // one per symbol
};

/// 32-bit range coder with byte-wise renormalization below 2^24 and a two
/// byte termination.
class RangeEncoder {
 public:
  void encode(std::uint32_t symbol, std::span<const std::uint32_t> cdf);
  /// Flushes and returns the payload. The encoder cannot be reused.
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 0;  // 0xFF bytes awaiting a possible carry
  bool first_ = true;          // the first cached byte is always 0 and dropped
  bool finished_ = false;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> payload);

  std::uint32_t decode(std::span<const std::uint32_t> cdf);
  /// Verifies the termination and that the payload was consumed exactly.
  void finish();
  /// Bytes consumed so far, including implicit zero padding.
  std::size_t position() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> payload_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;   // offset of the code value from low
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t low_ = 0;    // mirror of the encoder's low, mod 2^32
  std::size_t symbols_ = 0;
};

std::vector<std::uint8_t> ac_encode(const SymbolStream& stream);
std::vector<std::uint32_t> ac_decode(std::span<const std::uint8_t> payload,
                                     std::span<const CdfTable> tables,
                                     std::size_t count);

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kHeaderBytes = 15;
inline constexpr std::size_t kRecordHeaderBytes = 11;

struct GopHeader {
  std::uint8_t version = kContainerVersion;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint8_t gop_size = 0;
  std::uint32_t frame_count = 0;
  std::uint8_t codebook_size = 0;

  friend bool operator==(const GopHeader&, const GopHeader&) = default;
};

struct FrameRecord {
  FrameType type = FrameType::kI;
  std::uint16_t latent_height = 0;
  std::uint16_t latent_width = 0;
  std::uint16_t latent_channels = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct GopBitstream {
  GopHeader header;
  std::vector<FrameRecord> frames;

  /// Sum of the frame payload sizes in bits.
  std::uint64_t payload_bits() const;

  friend bool operator==(const GopBitstream&, const GopBitstream&) = default;
};

std::vector<std::uint8_t> write_gop(const GopBitstream& gop);
/// Parses one container starting at `bytes[0]`; `consumed` receives its size.
GopBitstream read_gop(std::span<const std::uint8_t> bytes,
                      std::size_t* consumed = nullptr);
/// Parses a concatenation of containers (a .frae file).
std::vector<GopBitstream> read_gops(std::span<const std::uint8_t> bytes);

}  // namespace frae
