#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace emostress {

inline constexpr int kWorkingSampleRate = 16000;

// Decoded PCM audio. Multi-channel data is interleaved frame by frame.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  int channels = 1;
  std::string source_path;

  std::size_t frames() const { return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0; }
  double duration_seconds() const { return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0; }
};

// Accepts RIFF/WAVE with PCM 8/16/24/32-bit integer or IEEE float32 data
// (WAVE_FORMAT_EXTENSIBLE is unwrapped). Samples are scaled to [-1, 1].
AudioClip read_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_path = {});

// Writes 16-bit PCM; samples are clamped and rounded to the nearest code.
void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip);
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);

AudioClip to_mono(const AudioClip& clip);

// Linear interpolation; output length is round(frames * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace emostress
