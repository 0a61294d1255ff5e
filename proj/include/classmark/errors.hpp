#pragma once

#include <stdexcept>
#include <string>

namespace classmark {

/// Every failure mode the toolkit reports. Codes are stable identifiers;
/// messages carry context.
enum class Errc {
  // steganography
  EmptyPayload,
  NonAsciiPayload,
  CapacityExceeded,
  MalformedHeader,
  NonPrintablePayload,
  ShapeMismatch,
  // key forging
  InsufficientSourceImages,
  ShapeIncompatible,
  DuplicateIdentity,
  CountMismatch,
  // nn engine
  UnsupportedShape,
  LabelOutOfRange,
  EmptyDataset,
  CorruptCheckpoint,
  VersionMismatch,
  // protocol
  SuspectUnreachable,
  EmptyKeySet,
  EmptyInput,
  // attacks
  LogoLargerThanImage,
  NonPositiveNoiseScale,
  InvalidPruneRate,
  // bench / io
  ChecksumMismatch,
  UnknownLayout,
  ConfigInvalid,
  DatasetMissing,
  IncompleteReport,
  UnsupportedImageFormat,
  IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace classmark
