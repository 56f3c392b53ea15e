#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emostress {

enum class Errc {
  FileNotFound,
  UnsupportedFormat,
  CorruptHeader,
  ChannelMismatch,
  InvalidRate,
  InvalidConfig,
  ClipTooShort,
  EmptyCollection,
  ShapeMismatch,
  InputTooSmall,
  LabelOutOfRange,
  EmptyDataset,
  BadMagic,
  UnsupportedVersion,
  ChecksumMismatch,
  TruncatedFile,
  TooFewSamples,
  DegenerateData,
  TooFewCentroids,
  MissingEmotion,
  InvalidTau,
  BadName,
  UnknownEmotionCode,
  UnknownSpeaker,
  MissingDirectory,
  DuplicatePath,
  ParseErrors,
  InvalidCount,
  IoError,
};

std::string_view to_string(Errc code);

// Every library failure is reported as an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace emostress
