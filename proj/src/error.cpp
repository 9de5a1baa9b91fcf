#include "wsiset/error.hpp"

namespace wsiset {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownFormat: return "UnknownFormat";
    case ErrorKind::CorruptMetadata: return "CorruptMetadata";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CropTooLarge: return "CropTooLarge";
    case ErrorKind::NoTissue: return "NoTissue";
    case ErrorKind::InsufficientTissue: return "InsufficientTissue";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
    case ErrorKind::IllegalLabel: return "IllegalLabel";
    case ErrorKind::InsufficientSlides: return "InsufficientSlides";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::MissingGrade: return "MissingGrade";
    case ErrorKind::MissingOrigin: return "MissingOrigin";
    case ErrorKind::ChannelMismatch: return "ChannelMismatch";
    case ErrorKind::EmptyAccumulator: return "EmptyAccumulator";
    case ErrorKind::ConfigConflict: return "ConfigConflict";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NotDivisible: return "NotDivisible";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidSchedule: return "InvalidSchedule";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
  }
  return "Unknown";
}

}  // namespace wsiset
