#include "emostress/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "emostress/error.hpp"

namespace emostress {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Voice {
  double f0_start;
  double f0_end;
  int harmonics;
  double rolloff;  // amplitude of harmonic h is rolloff^(h-1)
  double amplitude;
  double gate_hz;  // syllable-like on/off gating
  double noise;
};

// Three binary acoustic factors: pitch register, loudness with brightness, and
// steady versus gated delivery. Each class takes the sign pattern of the cube
// corner it is paired with (Sad with Distress; Boredom and Neutral with the
// Shame and Surprise corners), so the corpus carries a planted cube layout.
struct Factors {
  int pitch;
  int energy;
  int steady;
};

Factors factors_for(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::Angry: return {+1, +1, -1};
    case EmotionLabel::Boredom: return {-1, -1, -1};
    case EmotionLabel::Disgust: return {-1, -1, +1};
    case EmotionLabel::Fear: return {+1, -1, -1};
    case EmotionLabel::Happy: return {+1, -1, +1};
    case EmotionLabel::Neutral: return {-1, +1, +1};
    case EmotionLabel::Sad: return {-1, +1, -1};
  }
  return {};
}

Voice voice_for(EmotionLabel label) {
  const auto f = factors_for(label);
  Voice v{};
  v.f0_start = f.pitch > 0 ? 320.0 : 120.0;
  v.f0_end = v.f0_start * (f.steady > 0 ? 1.05 : 0.8);
  v.harmonics = f.energy > 0 ? 8 : 2;
  v.rolloff = f.energy > 0 ? 0.85 : 0.4;
  v.amplitude = f.energy > 0 ? 0.55 : 0.12;
  v.gate_hz = f.steady > 0 ? 0.0 : 4.0;
  v.noise = 0.005;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

AudioClip synthesize_clip(EmotionLabel label, std::size_t speaker, Rng& rng, const SynthOptions& opts) {
  AudioClip clip;
  clip.sample_rate = opts.sample_rate;
  clip.channels = 1;
  const double seconds = opts.min_seconds + (opts.max_seconds - opts.min_seconds) * rng.uniform();
  const auto n = static_cast<std::size_t>(seconds * opts.sample_rate);
  clip.samples.assign(n, 0.0);

  const Voice v = voice_for(label);
  const double speaker_pitch = 1.0 + 0.1 * (static_cast<double>(speaker % 5) - 1.0);
  const double pitch = speaker_pitch * (0.96 + 0.08 * rng.uniform());
  const double amp = v.amplitude * (0.85 + 0.3 * rng.uniform());
  const double sr = opts.sample_rate;

  std::vector<double> phase(static_cast<std::size_t>(v.harmonics));
  for (auto& ph : phase) ph = kTwoPi * rng.uniform();
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / sr;
    const double progress = static_cast<double>(t) / static_cast<double>(n);
    const double f0 = pitch * (v.f0_start + (v.f0_end - v.f0_start) * progress);
    double env = amp;
    if (v.gate_hz > 0 && std::sin(kTwoPi * v.gate_hz * time) < -0.3) env *= 0.1;
    double s = 0.0;
    double ha = 1.0;
    for (int h = 0; h < v.harmonics; ++h) {
      auto& ph = phase[static_cast<std::size_t>(h)];
      ph += kTwoPi * f0 * (h + 1) / sr;
      if (f0 * (h + 1) < sr / 2) s += ha * std::sin(ph);
      ha *= v.rolloff;
    }
    clip.samples[t] = env * s / std::max(1, v.harmonics / 2);
  }

  const double noise = v.noise + 0.003;
  for (auto& s : clip.samples) s = std::clamp(s + noise * (2.0 * rng.uniform() - 1.0), -1.0, 1.0);
  return clip;
}

std::size_t generate_synthetic_corpus(const std::filesystem::path& root, std::uint64_t seed, const SynthOptions& opts) {
  namespace fs = std::filesystem;
  if (opts.speakers == 0 || opts.clips_per_class == 0) throw Error(Errc::InvalidConfig, "synthetic corpus needs speakers and clips");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + root.string());

  Rng rng(derive_seed(seed, "synth"));
  std::size_t written = 0;
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    const auto label = static_cast<EmotionLabel>(c);
    for (std::size_t i = 0; i < opts.clips_per_class; ++i) {
      const std::size_t speaker = i % opts.speakers;
      const auto dir = root / ("spk" + std::to_string(speaker));
      fs::create_directories(dir, ec);
      if (ec) throw Error(Errc::IoError, "cannot create " + dir.string());
      auto clip = synthesize_clip(label, speaker, rng, opts);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%02zu.wav", lower(to_string(label)).c_str(), i / opts.speakers);
      write_wav_pcm16(dir / name, clip);
      ++written;
    }
  }
  return written;
}

}  // namespace emostress
