#pragma once

#include <cstdint>
#include <filesystem>

#include "emostress/audio.hpp"
#include "emostress/labels.hpp"
#include "emostress/rng.hpp"

namespace emostress {

// Tone signature per emotion class, used as a stand-in corpus for tests and
// demos. Classes differ in pitch register, loudness and gating; the Sad
// analogue is low, loud and gated, mirroring the Distress corner.
struct SynthOptions {
  std::size_t clips_per_class = 30;
  std::size_t speakers = 3;
  double min_seconds = 1.6;
  double max_seconds = 2.4;
  int sample_rate = kWorkingSampleRate;
};

AudioClip synthesize_clip(EmotionLabel label, std::size_t speaker, Rng& rng, const SynthOptions& opts = {});

// Writes <root>/spk<k>/<emotion>_<nn>.wav for every class; returns the file count.
std::size_t generate_synthetic_corpus(const std::filesystem::path& root, std::uint64_t seed, const SynthOptions& opts = {});

}  // namespace emostress
