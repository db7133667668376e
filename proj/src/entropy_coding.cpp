#include "frae/entropy_coding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "frae/error.hpp"

namespace frae {

namespace {

constexpr std::uint32_t kTop = 1u << 24;

[[noreturn]] void fail(BitstreamErrorKind kind, const std::string& what) {
  throw BitstreamError(kind, what);
}

}  // namespace

CdfTable quantize_pmf(std::span<const double> pmf) {
  const std::size_t levels = pmf.size();
  if (levels == 0 || levels > kProbabilityTotal) {
    fail(BitstreamErrorKind::kInvalidTable,
         "cannot quantize a distribution over " + std::to_string(levels) + " symbols");
  }
  std::vector<double> p(levels);
  double total = 0.0;
  for (std::size_t i = 0; i < levels; ++i) {
    if (!std::isfinite(pmf[i]) || pmf[i] < 0.0) {
      fail(BitstreamErrorKind::kInvalidTable, "probabilities must be finite and non-negative");
    }
    p[i] = std::max(pmf[i], kProbabilityFloor);
    total += p[i];
  }
  CdfTable cdf(levels + 1);
  double cumulative = 0.0;
  for (std::size_t i = 1; i < levels; ++i) {
    cumulative += p[i - 1] / total;
    // nearbyint rounds half to even under the default rounding mode.
    const double scaled = std::nearbyint(cumulative * kProbabilityTotal);
    cdf[i] = static_cast<std::uint32_t>(std::clamp(scaled, 0.0, double(kProbabilityTotal)));
  }
  cdf[0] = 0;
  cdf[levels] = kProbabilityTotal;
  for (std::size_t i = 1; i < levels; ++i) cdf[i] = std::max(cdf[i], cdf[i - 1] + 1);
  for (std::size_t i = levels - 1; i >= 1; --i) cdf[i] = std::min(cdf[i], cdf[i + 1] - 1);
  return cdf;
}

void validate_table(std::span<const std::uint32_t> cdf) {
  if (cdf.size() < 2 || cdf.front() != 0 || cdf.back() != kProbabilityTotal) {
    fail(BitstreamErrorKind::kInvalidTable, "table must run from 0 to 65536");
  }
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    if (cdf[i] < cdf[i - 1]) fail(BitstreamErrorKind::kInvalidTable, "table decreases");
  }
}

void RangeEncoder::shift_low() {
  if (low_ < 0xFF000000u || low_ >= (std::uint64_t{1} << 32)) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    if (!first_) out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
    first_ = false;
    for (; pending_ > 0; --pending_) out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  } else {
    ++pending_;
  }
  low_ = (low_ << 8) & 0xFFFFFFFFu;
}

void RangeEncoder::encode(std::uint32_t symbol, std::span<const std::uint32_t> cdf) {
  if (finished_) throw InvalidArgument("range encoder already finished");
  if (symbol + 1 >= cdf.size()) {
    fail(BitstreamErrorKind::kInvalidField,
         "symbol " + std::to_string(symbol) + " outside a table of " +
             std::to_string(cdf.size() - 1) + " entries");
  }
  validate_table(cdf);
  const std::uint32_t start = cdf[symbol];
  const std::uint32_t freq = cdf[symbol + 1] - start;
  if (freq == 0) {
    fail(BitstreamErrorKind::kZeroProbability,
         "symbol " + std::to_string(symbol) + " has zero probability");
  }
  const std::uint32_t r = range_ >> kProbabilityBits;
  low_ += static_cast<std::uint64_t>(r) * start;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (finished_) throw InvalidArgument("range encoder already finished");
  finished_ = true;
  // Smallest multiple of 2^16 not below low; it lies inside the final
  // interval because range >= 2^24, so two bytes identify it.
  low_ = (low_ + 0xFFFFu) & ~std::uint64_t{0xFFFF};
  shift_low();
  shift_low();
  shift_low();  // releases the cached byte; what remains is all zero
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload)
    : payload_(payload) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= payload_.size() + 2) {
    fail(BitstreamErrorKind::kPayloadExhausted,
         "payload exhausted at byte " + std::to_string(pos_) + " after " +
             std::to_string(symbols_) + " symbols");
  }
  const std::uint8_t b = pos_ < payload_.size() ? payload_[pos_] : 0;
  ++pos_;
  return b;
}

std::uint32_t RangeDecoder::decode(std::span<const std::uint32_t> cdf) {
  validate_table(cdf);
  const std::uint32_t r = range_ >> kProbabilityBits;
  const std::uint32_t value = code_ / r;
  if (value >= kProbabilityTotal) {
    fail(BitstreamErrorKind::kCorruptPayload,
         "code value outside the coding interval at symbol " + std::to_string(symbols_));
  }
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), value);
  const auto symbol = static_cast<std::uint32_t>(it - cdf.begin() - 1);
  const std::uint32_t start = cdf[symbol];
  const std::uint32_t freq = cdf[symbol + 1] - start;
  code_ -= r * start;
  low_ += r * start;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    low_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  ++symbols_;
  return symbol;
}

void RangeDecoder::finish() {
  // The encoder terminated on the smallest multiple of 2^16 not below low.
  const std::uint32_t expected = (0x10000u - (low_ & 0xFFFFu)) & 0xFFFFu;
  if (code_ != expected) {
    fail(BitstreamErrorKind::kCorruptPayload,
         "termination mismatch after " + std::to_string(symbols_) + " symbols");
  }
  if (pos_ != payload_.size() + 2) {
    fail(BitstreamErrorKind::kLengthMismatch,
         "decoder consumed " + std::to_string(pos_) + " bytes of a " +
             std::to_string(payload_.size()) + "-byte payload");
  }
}

std::vector<std::uint8_t> ac_encode(const SymbolStream& stream) {
  if (stream.symbols.size() != stream.tables.size()) {
    throw InvalidArgument("ac_encode: one table per symbol is required");
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < stream.symbols.size(); ++i) {
    enc.encode(stream.symbols[i], stream.tables[i]);
  }
  return enc.finish();
}

std::vector<std::uint32_t> ac_decode(std::span<const std::uint8_t> payload,
                                     std::span<const CdfTable> tables,
                                     std::size_t count) {
  if (tables.size() != count) {
    throw InvalidArgument("ac_decode: one table per symbol is required");
  }
  RangeDecoder dec(payload);
  std::vector<std::uint32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode(tables[i]);
  dec.finish();
  return out;
}

std::uint64_t GopBitstream::payload_bits() const {
  std::uint64_t bits = 0;
  for (const FrameRecord& f : frames) bits += 8 * static_cast<std::uint64_t>(f.payload.size());
  return bits;
}

namespace {

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      fail(BitstreamErrorKind::kLengthMismatch,
           std::string("container truncated in ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::vector<std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> v(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void validate_structure(const GopBitstream& gop) {
  const GopHeader& h = gop.header;
  if (h.frame_count != gop.frames.size()) {
    fail(BitstreamErrorKind::kLengthMismatch,
         "header declares " + std::to_string(h.frame_count) + " frames, container holds " +
             std::to_string(gop.frames.size()));
  }
  if (h.frame_count == 0 || h.gop_size == 0 || h.frame_count > h.gop_size) {
    fail(BitstreamErrorKind::kInvalidField, "frame count must be in [1, gop_size]");
  }
  if (h.width == 0 || h.height == 0 || h.codebook_size < 2) {
    fail(BitstreamErrorKind::kInvalidField, "zero dimension or codebook size");
  }
  for (std::size_t i = 0; i < gop.frames.size(); ++i) {
    const FrameType expected = i == 0 ? FrameType::kI : FrameType::kP;
    if (gop.frames[i].type != expected) {
      fail(BitstreamErrorKind::kInvalidField,
           "frame " + std::to_string(i) + " must be of type " + std::string(to_string(expected)));
    }
  }
}

}  // namespace

std::vector<std::uint8_t> write_gop(const GopBitstream& gop) {
  validate_structure(gop);
  if (gop.header.version != kContainerVersion) {
    fail(BitstreamErrorKind::kVersionMismatch, "only version 1 can be written");
  }
  std::vector<std::uint8_t> out{'F', 'R', 'A', 'E', gop.header.version};
  put16(out, gop.header.width);
  put16(out, gop.header.height);
  out.push_back(gop.header.gop_size);
  put32(out, gop.header.frame_count);
  out.push_back(gop.header.codebook_size);
  for (const FrameRecord& f : gop.frames) {
    if (f.payload.size() > 0xFFFFFFFFu) {
      fail(BitstreamErrorKind::kInvalidField, "payload exceeds 4 GiB");
    }
    out.push_back(static_cast<std::uint8_t>(f.type));
    put16(out, f.latent_height);
    put16(out, f.latent_width);
    put16(out, f.latent_channels);
    put32(out, static_cast<std::uint32_t>(f.payload.size()));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
  }
  return out;
}

GopBitstream read_gop(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  Reader in(bytes);
  in.need(4, "magic");
  for (char m : {'F', 'R', 'A', 'E'}) {
    if (in.u8("magic") != static_cast<std::uint8_t>(m)) {
      fail(BitstreamErrorKind::kBadMagic, "container does not start with FRAE");
    }
  }
  GopBitstream gop;
  gop.header.version = in.u8("version");
  if (gop.header.version != kContainerVersion) {
    fail(BitstreamErrorKind::kVersionMismatch,
         "container version " + std::to_string(gop.header.version) + ", expected 1");
  }
  gop.header.width = in.u16("width");
  gop.header.height = in.u16("height");
  gop.header.gop_size = in.u8("gop size");
  gop.header.frame_count = in.u32("frame count");
  gop.header.codebook_size = in.u8("codebook size");
  if (gop.header.frame_count == 0 || gop.header.frame_count > gop.header.gop_size) {
    fail(BitstreamErrorKind::kInvalidField, "frame count must be in [1, gop_size]");
  }
  for (std::uint32_t i = 0; i < gop.header.frame_count; ++i) {
    FrameRecord f;
    const std::uint8_t type = in.u8("frame type");
    if (type > 1) fail(BitstreamErrorKind::kInvalidField, "unknown frame type " + std::to_string(type));
    f.type = static_cast<FrameType>(type);
    f.latent_height = in.u16("latent height");
    f.latent_width = in.u16("latent width");
    f.latent_channels = in.u16("latent channels");
    const std::uint32_t len = in.u32("payload length");
    f.payload = in.take(len, "payload");
    gop.frames.push_back(std::move(f));
  }
  validate_structure(gop);
  if (consumed) *consumed = in.position();
  return gop;
}

std::vector<GopBitstream> read_gops(std::span<const std::uint8_t> bytes) {
  std::vector<GopBitstream> out;
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    std::size_t used = 0;
    out.push_back(read_gop(bytes.subspan(offset), &used));
    offset += used;
  }
  return out;
}

}  // namespace frae
