#pragma once

#include <stdexcept>
#include <string>

namespace frae {

/// Error families. Each family maps to a distinct CLI exit code.
enum class ErrorFamily {
  kInvalidArgument,  // bad shapes, sizes, configuration values
  kIo,               // file system and raw-video ingestion
  kBitstream,        // container parsing and entropy coding
  kModel,            // checkpoint loading, model/bitstream mismatch
  kNumeric,          // non-finite values during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorFamily family, const std::string& what)
      : std::runtime_error(what), family_(family) {}

  ErrorFamily family() const noexcept { return family_; }

 private:
  ErrorFamily family_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorFamily::kInvalidArgument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorFamily::kIo, what) {}
};

/// Raised by read_yuv420 when the stream ends inside a frame.
class TruncatedVideo : public IoError {
 public:
  TruncatedVideo(std::size_t frame_index, const std::string& what)
      : IoError(what), frame_index_(frame_index) {}

  std::size_t frame_index() const noexcept { return frame_index_; }

 private:
  std::size_t frame_index_;
};

enum class BitstreamErrorKind {
  kBadMagic,
  kVersionMismatch,
  kLengthMismatch,
  kInvalidField,
  kPayloadExhausted,
  kCorruptPayload,
  kZeroProbability,
  kInvalidTable,
};

const char* to_string(BitstreamErrorKind kind) noexcept;

class BitstreamError : public Error {
 public:
  BitstreamError(BitstreamErrorKind kind, const std::string& what)
      : Error(ErrorFamily::kBitstream,
              std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  BitstreamErrorKind kind() const noexcept { return kind_; }

 private:
  BitstreamErrorKind kind_;
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what)
      : Error(ErrorFamily::kModel, what) {}
};

class NumericError : public Error {
 public:
  NumericError(long batch_index, const std::string& what)
      : Error(ErrorFamily::kNumeric, what), batch_index_(batch_index) {}

  /// Index of the first offending batch element, or -1 when unknown.
  long batch_index() const noexcept { return batch_index_; }

 private:
  long batch_index_;
};

}  // namespace frae
