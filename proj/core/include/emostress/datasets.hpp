#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emostress/labels.hpp"

namespace emostress {

enum class Split : std::uint8_t { Unassigned, Train, Test };

std::string_view to_string(Split split);

struct ClipRecord {
  std::string path;  // relative to the dataset root, '/'-separated
  DatasetKind dataset = DatasetKind::EmoDB;
  std::string speaker;
  CorpusEmotion emotion = CorpusEmotion::Neutral;
  std::string aux;
  Split split = Split::Unassigned;

  bool operator==(const ClipRecord&) const = default;
};

struct Manifest {
  std::vector<ClipRecord> records;
  std::vector<std::string> warnings;

  std::map<CorpusEmotion, std::size_t> emotion_counts() const;
  std::map<std::string, std::size_t> speaker_counts() const;
  std::size_t count(Split split) const;
};

// Emo-DB names: 2-char speaker, 3-char text code, emotion letter, version
// letter, ".wav" (e.g. "03a01Fa.wav"). Emotion letters are German initials:
// W anger, L boredom, E disgust, A fear, F happiness, T sadness, N neutral.
struct EmoDbName {
  std::string speaker;
  std::string text;
  CorpusEmotion emotion;
  std::string version;
};
EmoDbName parse_emodb_filename(std::string_view name);

// SAVEE paths: "<DC|JE|JK|KL>/<code><2 digits>.wav" with codes
// a, d, f, h, n, sa, su (two-letter codes are matched first).
struct SaveeName {
  std::string speaker;
  CorpusEmotion emotion;
  int index;
};
SaveeName parse_savee_path(std::string_view relpath);

// Synthetic corpus: "<speaker>/<emotion>_<2+ digits>.wav" with lower-case
// emotion names, e.g. "spk1/sad_07.wav".
struct SynthName {
  std::string speaker;
  CorpusEmotion emotion;
  int index;
};
SynthName parse_synth_path(std::string_view relpath);

// Recursive .wav scan, parsed per kind, sorted by path. Parse failures are
// collected and reported together.
Manifest build_manifest(const std::filesystem::path& root, DatasetKind kind);

// Seeded partition into train/test. With stratify, each emotion gets a train
// quota proportional to its frequency via largest-remainder rounding.
Manifest split_manifest(Manifest manifest, std::size_t train_count, std::uint64_t seed, bool stratify = true);

// CSV with header path,dataset,speaker,emotion,aux,split.
std::string manifest_to_csv(const Manifest& manifest);
Manifest manifest_from_csv(std::string_view csv);

}  // namespace emostress
