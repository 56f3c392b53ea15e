#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "emostress/audio.hpp"
#include "emostress/matrix.hpp"

namespace emostress {

// MFCC front end. Defaults give 13 cepstra + deltas + delta-deltas over
// 25 ms Hamming frames every 10 ms, fixed to 199 frames.
struct FeatureConfig {
  int sample_rate = kWorkingSampleRate;
  double preemphasis = 0.97;
  std::size_t frame_length = 400;
  std::size_t hop = 160;
  std::size_t nfft = 512;
  std::size_t n_mels = 26;
  double fmin = 0.0;
  double fmax = 8000.0;
  std::size_t n_ceps = 13;
  std::size_t delta_window = 2;
  std::size_t target_frames = 199;
  double log_floor = 1e-10;

  void validate() const;
  std::size_t feature_dim() const { return 3 * n_ceps; }
  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureMatrix {
  Matrix values;                    // target_frames x (3 * n_ceps)
  std::size_t frame_count_raw = 0;  // frames before fix_length
};

struct NormalizerStats {
  static constexpr double kMinStd = 1e-8;
  std::vector<double> mean;
  std::vector<double> std;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Centre frequencies (Hz) of the triangular filters, equally spaced in mel.
std::vector<double> mel_center_frequencies(const FeatureConfig& cfg);

// n_mels x (nfft/2 + 1). Triangle edges and peaks sit on FFT bins
// floor((nfft + 1) * f / sample_rate); each peak is exactly 1.
Matrix mel_filterbank_matrix(const FeatureConfig& cfg);

// Orthonormal DCT-II basis, n_ceps x n_mels.
Matrix dct_matrix(std::size_t n_ceps, std::size_t n_mels);

std::vector<double> hamming_window(std::size_t length);

// T x n_ceps static cepstra, T = 1 + floor((L - frame_length) / hop).
Matrix extract_static_mfcc(const AudioClip& clip, const FeatureConfig& cfg);

// Regression deltas with replicate-edge padding; columns [static | d | dd].
Matrix append_deltas(const Matrix& statics, std::size_t window);

// Zero-pads at the end or centre-crops to `target` rows.
Matrix fix_length(const Matrix& feat, std::size_t target);

NormalizerStats fit_normalizer(std::span<const Matrix> train_feats);
Matrix apply_normalizer(const Matrix& feat, const NormalizerStats& stats);

// mono -> resample -> static MFCC -> deltas, without normalization or length fixing.
Matrix extract_raw_features(const AudioClip& clip, const FeatureConfig& cfg);

// Full front end: raw features, optional normalization, then fix_length.
FeatureMatrix extract_features(const AudioClip& clip, const FeatureConfig& cfg,
                               const std::optional<NormalizerStats>& stats = std::nullopt);
FeatureMatrix finalize_features(const Matrix& raw, const FeatureConfig& cfg,
                                const std::optional<NormalizerStats>& stats);

// "EMOF" cache: magic, u32 version, u32 rows, u32 cols, rows*cols float32, little-endian.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;
void write_feature_cache(const std::filesystem::path& path, const Matrix& values);
Matrix read_feature_cache(const std::filesystem::path& path);

}  // namespace emostress
