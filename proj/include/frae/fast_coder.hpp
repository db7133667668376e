#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "frae/entropy_coding.hpp"
#include "frae/fast_coder_abi.h"

namespace frae {

/// Default shared-library name looked up by CoderBackend::probe.
inline constexpr const char* kFastCoderLibrary = "libfrae_fast_coder.so";

/// Entropy-coding entry points behind the flat C interface. Either the
/// in-process reference implementation or a dynamically loaded accelerated
/// library; both produce identical bytes.
class CoderBackend {
 public:
  static CoderBackend reference();
  /// Loads `library` (or $FRAE_FAST_CODER, or kFastCoderLibrary) and checks
  /// its ABI version. Falls back to the reference coder when that fails;
  /// `reason()` then says why.
  static CoderBackend probe(const std::filesystem::path& library = {});

  bool accelerated() const { return handle_ != nullptr; }
  const std::string& description() const { return description_; }
  const std::string& reason() const { return reason_; }

  std::vector<std::uint8_t> encode(const SymbolStream& stream) const;
  std::vector<std::uint32_t> decode(std::span<const std::uint8_t> payload,
                                    std::span<const CdfTable> tables,
                                    std::size_t count) const;
  std::vector<std::uint8_t> write_gop(const GopBitstream& gop) const;
  GopBitstream read_gop(std::span<const std::uint8_t> bytes,
                        std::size_t* consumed = nullptr) const;

 private:
  struct Functions {
    frae_fc_abi_version_fn abi_version;
    frae_fc_encode_fn encode;
    frae_fc_decode_fn decode;
    frae_fc_write_gop_fn write_gop;
    frae_fc_read_gop_fn read_gop;
  };

  Functions fn_{};
  std::shared_ptr<void> handle_;
  std::string description_;
  std::string reason_;
};

}  // namespace frae
