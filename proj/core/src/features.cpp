#include "emostress/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "byte_io.hpp"
#include "emostress/error.hpp"
#include "emostress/fft.hpp"

namespace emostress {

void FeatureConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (sample_rate <= 0) fail("sample_rate must be positive");
  if (frame_length == 0 || hop == 0) fail("frame_length and hop must be positive");
  if (!is_power_of_two(nfft) || nfft < frame_length) fail("nfft must be a power of two >= frame_length");
  if (n_mels == 0 || n_ceps == 0) fail("n_mels and n_ceps must be positive");
  if (n_ceps > n_mels) fail("n_ceps must not exceed n_mels");
  if (fmin < 0.0 || fmin >= fmax) fail("need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) fail("fmax exceeds Nyquist");
  if (target_frames == 0) fail("target_frames must be >= 1");
  if (delta_window == 0) fail("delta_window must be >= 1");
  if (!(log_floor > 0.0)) fail("log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points_hz(const FeatureConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> hz(cfg.n_mels + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_center_frequencies(const FeatureConfig& cfg) {
  cfg.validate();
  auto hz = mel_points_hz(cfg);
  return {hz.begin() + 1, hz.end() - 1};
}

Matrix mel_filterbank_matrix(const FeatureConfig& cfg) {
  cfg.validate();
  const std::size_t n_bins = cfg.nfft / 2 + 1;
  const auto hz = mel_points_hz(cfg);
  std::vector<std::size_t> bin(hz.size());
  for (std::size_t i = 0; i < hz.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::floor(static_cast<double>(cfg.nfft + 1) * hz[i] / cfg.sample_rate));
    bin[i] = std::min(b, n_bins - 1);
  }

  Matrix fb(cfg.n_mels, n_bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const std::size_t left = bin[m], centre = bin[m + 1], right = bin[m + 2];
    for (std::size_t k = left; k <= centre; ++k) {
      fb(m, k) = centre == left ? 1.0 : static_cast<double>(k - left) / static_cast<double>(centre - left);
    }
    for (std::size_t k = centre + 1; k <= right; ++k) {
      fb(m, k) = static_cast<double>(right - k) / static_cast<double>(right - centre);
    }
  }
  return fb;
}

Matrix dct_matrix(std::size_t n_ceps, std::size_t n_mels) {
  Matrix d(n_ceps, n_mels);
  const double n = static_cast<double>(n_mels);
  for (std::size_t k = 0; k < n_ceps; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t m = 0; m < n_mels; ++m) {
      d(k, m) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(m) + 1.0) / (2.0 * n));
    }
  }
  return d;
}

std::vector<double> hamming_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
  }
  return w;
}

Matrix extract_static_mfcc(const AudioClip& clip, const FeatureConfig& cfg) {
  cfg.validate();
  if (clip.channels != 1) throw Error(Errc::ChannelMismatch, "static MFCC expects a mono clip");
  if (clip.sample_rate != cfg.sample_rate) {
    throw Error(Errc::InvalidRate, "clip rate " + std::to_string(clip.sample_rate) + " != feature rate " +
                                       std::to_string(cfg.sample_rate));
  }
  const std::size_t length = clip.samples.size();
  if (length < cfg.frame_length) {
    throw Error(Errc::ClipTooShort, clip.source_path + " has " + std::to_string(length) + " samples, need " +
                                        std::to_string(cfg.frame_length));
  }

  std::vector<double> emphasized(length);
  emphasized[0] = clip.samples[0];
  for (std::size_t t = 1; t < length; ++t) emphasized[t] = clip.samples[t] - cfg.preemphasis * clip.samples[t - 1];

  const std::size_t frames = 1 + (length - cfg.frame_length) / cfg.hop;
  const auto window = hamming_window(cfg.frame_length);
  const auto fb = mel_filterbank_matrix(cfg);
  const auto dct = dct_matrix(cfg.n_ceps, cfg.n_mels);

  Matrix out(frames, cfg.n_ceps);
  std::vector<double> frame(cfg.frame_length);
  std::vector<double> log_mel(cfg.n_mels);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = emphasized.data() + f * cfg.hop;
    for (std::size_t i = 0; i < cfg.frame_length; ++i) frame[i] = src[i] * window[i];
    const auto power = power_spectrum(frame, cfg.nfft);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double energy = 0.0;
      const auto weights = fb.row(m);
      for (std::size_t k = 0; k < power.size(); ++k) energy += weights[k] * power[k];
      log_mel[m] = std::log(std::max(energy, cfg.log_floor));
    }
    for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
      double acc = 0.0;
      const auto basis = dct.row(k);
      for (std::size_t m = 0; m < cfg.n_mels; ++m) acc += basis[m] * log_mel[m];
      out(f, k) = acc;
    }
  }
  return out;
}

namespace {

Matrix regression_delta(const Matrix& c, std::size_t window) {
  const std::size_t rows = c.rows(), cols = c.cols();
  double denom = 0.0;
  for (std::size_t n = 1; n <= window; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;

  Matrix d(rows, cols);
  const auto last = static_cast<std::ptrdiff_t>(rows) - 1;
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t n = 1; n <= window; ++n) {
      const auto ti = static_cast<std::ptrdiff_t>(t);
      const auto ni = static_cast<std::ptrdiff_t>(n);
      const auto ahead = static_cast<std::size_t>(std::min(ti + ni, last));
      const auto behind = static_cast<std::size_t>(std::max<std::ptrdiff_t>(ti - ni, 0));
      for (std::size_t j = 0; j < cols; ++j) d(t, j) += static_cast<double>(n) * (c(ahead, j) - c(behind, j));
    }
    for (std::size_t j = 0; j < cols; ++j) d(t, j) /= denom;
  }
  return d;
}

}  // namespace

Matrix append_deltas(const Matrix& statics, std::size_t window) {
  if (statics.rows() == 0) throw Error(Errc::ShapeMismatch, "append_deltas needs at least one frame");
  if (window == 0) throw Error(Errc::InvalidConfig, "delta window must be >= 1");
  const auto d1 = regression_delta(statics, window);
  const auto d2 = regression_delta(d1, window);
  const std::size_t n = statics.cols();
  Matrix out(statics.rows(), 3 * n);
  for (std::size_t t = 0; t < statics.rows(); ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      out(t, j) = statics(t, j);
      out(t, n + j) = d1(t, j);
      out(t, 2 * n + j) = d2(t, j);
    }
  }
  return out;
}

Matrix fix_length(const Matrix& feat, std::size_t target) {
  if (feat.rows() == 0) throw Error(Errc::ShapeMismatch, "fix_length needs at least one frame");
  if (feat.rows() == target) return feat;
  Matrix out(target, feat.cols());
  const std::size_t offset = feat.rows() > target ? (feat.rows() - target) / 2 : 0;
  const std::size_t copy = std::min(target, feat.rows());
  for (std::size_t r = 0; r < copy; ++r) {
    std::copy_n(feat.row(offset + r).begin(), feat.cols(), out.row(r).begin());
  }
  return out;
}

NormalizerStats fit_normalizer(std::span<const Matrix> train_feats) {
  if (train_feats.empty()) throw Error(Errc::EmptyCollection, "normalizer needs at least one feature matrix");
  const std::size_t cols = train_feats.front().cols();
  std::vector<double> sum(cols, 0.0);
  std::size_t count = 0;
  for (const auto& m : train_feats) {
    if (m.cols() != cols) throw Error(Errc::ShapeMismatch, "feature matrices disagree on column count");
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t j = 0; j < cols; ++j) sum[j] += m(r, j);
    count += m.rows();
  }
  if (count == 0) throw Error(Errc::EmptyCollection, "feature matrices have no frames");

  NormalizerStats stats;
  stats.mean.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) stats.mean[j] = sum[j] / static_cast<double>(count);

  // Second pass around the mean avoids cancellation on large offsets such as c0.
  std::vector<double> sq(cols, 0.0);
  for (const auto& m : train_feats)
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = m(r, j) - stats.mean[j];
        sq[j] += d * d;
      }
  stats.std.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    stats.std[j] = std::max(std::sqrt(sq[j] / static_cast<double>(count)), NormalizerStats::kMinStd);
  }
  return stats;
}

Matrix apply_normalizer(const Matrix& feat, const NormalizerStats& stats) {
  if (stats.mean.size() != feat.cols() || stats.std.size() != feat.cols()) {
    throw Error(Errc::ShapeMismatch, "normalizer has " + std::to_string(stats.mean.size()) + " columns, features have " +
                                         std::to_string(feat.cols()));
  }
  Matrix out(feat.rows(), feat.cols());
  for (std::size_t r = 0; r < feat.rows(); ++r)
    for (std::size_t j = 0; j < feat.cols(); ++j) out(r, j) = (feat(r, j) - stats.mean[j]) / stats.std[j];
  return out;
}

Matrix extract_raw_features(const AudioClip& clip, const FeatureConfig& cfg) {
  const auto prepared = resample(to_mono(clip), cfg.sample_rate);
  return append_deltas(extract_static_mfcc(prepared, cfg), cfg.delta_window);
}

FeatureMatrix finalize_features(const Matrix& raw, const FeatureConfig& cfg,
                                const std::optional<NormalizerStats>& stats) {
  FeatureMatrix out;
  out.frame_count_raw = raw.rows();
  out.values = fix_length(stats ? apply_normalizer(raw, *stats) : raw, cfg.target_frames);
  return out;
}

FeatureMatrix extract_features(const AudioClip& clip, const FeatureConfig& cfg,
                               const std::optional<NormalizerStats>& stats) {
  return finalize_features(extract_raw_features(clip, cfg), cfg, stats);
}

void write_feature_cache(const std::filesystem::path& path, const Matrix& values) {
  detail::ByteWriter w;
  w.text("EMOF");
  w.u32(kFeatureCacheVersion);
  w.u32(static_cast<std::uint32_t>(values.rows()));
  w.u32(static_cast<std::uint32_t>(values.cols()));
  for (double v : values.data()) w.f32(static_cast<float>(v));
  detail::write_file_atomic(path, w.buffer());
}

Matrix read_feature_cache(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes, path.string());
  if (r.text(4) != "EMOF") throw Error(Errc::BadMagic, path.string());
  const auto version = r.u32();
  if (version != kFeatureCacheVersion) {
    throw Error(Errc::UnsupportedVersion, path.string() + " has version " + std::to_string(version));
  }
  const auto rows = r.u32();
  const auto cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining()) throw Error(Errc::TruncatedFile, path.string());
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = static_cast<double>(r.f32());
  return m;
}

}  // namespace emostress
