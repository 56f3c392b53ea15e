#include "emostress/error.hpp"

namespace emostress {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptHeader: return "CorruptHeader";
    case Errc::ChannelMismatch: return "ChannelMismatch";
    case Errc::InvalidRate: return "InvalidRate";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ClipTooShort: return "ClipTooShort";
    case Errc::EmptyCollection: return "EmptyCollection";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InputTooSmall: return "InputTooSmall";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::TooFewCentroids: return "TooFewCentroids";
    case Errc::MissingEmotion: return "MissingEmotion";
    case Errc::InvalidTau: return "InvalidTau";
    case Errc::BadName: return "BadName";
    case Errc::UnknownEmotionCode: return "UnknownEmotionCode";
    case Errc::UnknownSpeaker: return "UnknownSpeaker";
    case Errc::MissingDirectory: return "MissingDirectory";
    case Errc::DuplicatePath: return "DuplicatePath";
    case Errc::ParseErrors: return "ParseErrors";
    case Errc::InvalidCount: return "InvalidCount";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace emostress
