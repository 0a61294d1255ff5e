#include "classmark/errors.hpp"

namespace classmark {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::EmptyPayload: return "EmptyPayload";
    case Errc::NonAsciiPayload: return "NonAsciiPayload";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::NonPrintablePayload: return "NonPrintablePayload";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InsufficientSourceImages: return "InsufficientSourceImages";
    case Errc::ShapeIncompatible: return "ShapeIncompatible";
    case Errc::DuplicateIdentity: return "DuplicateIdentity";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::UnsupportedShape: return "UnsupportedShape";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::SuspectUnreachable: return "SuspectUnreachable";
    case Errc::EmptyKeySet: return "EmptyKeySet";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LogoLargerThanImage: return "LogoLargerThanImage";
    case Errc::NonPositiveNoiseScale: return "NonPositiveNoiseScale";
    case Errc::InvalidPruneRate: return "InvalidPruneRate";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::UnknownLayout: return "UnknownLayout";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::DatasetMissing: return "DatasetMissing";
    case Errc::IncompleteReport: return "IncompleteReport";
    case Errc::UnsupportedImageFormat: return "UnsupportedImageFormat";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace classmark
