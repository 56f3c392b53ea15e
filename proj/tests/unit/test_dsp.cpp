#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emostress/error.hpp"
#include "emostress/features.hpp"
#include "emostress/fft.hpp"
#include "dsp_oracle.hpp"

using namespace emostress;

using testing::max_rel;
using testing::noise;
using testing::sine;

TEST_CASE("power spectrum matches the direct DFT on random frames") {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> frame(400);
    for (auto& v : frame) v = rng.normal();
    const auto fast = power_spectrum(frame, 512);
    const auto slow = testing::direct_power_spectrum(frame, 512);
    REQUIRE(fast.size() == 257);
    CHECK(max_rel(fast, slow) < 1e-6);
  }
}

TEST_CASE("Parseval: doubled one-sided spectrum equals nfft times frame energy") {
  Rng rng(5);
  const auto window = hamming_window(400);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> frame(400);
    double energy = 0;
    for (std::size_t i = 0; i < frame.size(); ++i) {
      frame[i] = rng.normal() * window[i];
      energy += frame[i] * frame[i];
    }
    const auto p = testing::direct_power_spectrum(frame, 512);
    const auto fast = power_spectrum(frame, 512);
    double total = fast[0] + fast[256];
    for (std::size_t k = 1; k < 256; ++k) total += 2 * fast[k];
    CHECK(std::abs(total - 512 * energy) / (512 * energy) < 1e-6);
    double total_oracle = p[0] + p[256];
    for (std::size_t k = 1; k < 256; ++k) total_oracle += 2 * p[k];
    CHECK(std::abs(total_oracle - 512 * energy) / (512 * energy) < 1e-9);
  }
}

TEST_CASE("fft rejects non power-of-two sizes") {
  std::vector<std::complex<double>> v(6);
  CHECK_THROWS_AS(fft_inplace(v), Error);
  CHECK(is_power_of_two(512));
  CHECK_FALSE(is_power_of_two(400));
}

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(700) == doctest::Approx(781.17).epsilon(1e-5));
  CHECK(hz_to_mel(700) == doctest::Approx(2595 * std::log10(2.0)));
  for (double hz : {0.0, 123.0, 1000.0, 7999.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
}

TEST_CASE("mel filterbank shape, peaks and contiguity") {
  FeatureConfig cfg;
  const auto fb = mel_filterbank_matrix(cfg);
  CHECK(fb.rows() == 26);
  CHECK(fb.cols() == 257);
  const auto centers = mel_center_frequencies(cfg);
  REQUIRE(centers.size() == 26);
  for (std::size_t i = 1; i < centers.size(); ++i) CHECK(centers[i] > centers[i - 1]);
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    double peak = 0;
    std::size_t first = fb.cols(), last = 0;
    for (std::size_t k = 0; k < fb.cols(); ++k) {
      CHECK(fb(m, k) >= 0.0);
      if (fb(m, k) > 0) {
        first = std::min(first, k);
        last = k;
      }
      peak = std::max(peak, fb(m, k));
    }
    CHECK(peak == 1.0);
    for (std::size_t k = first; k <= last; ++k) CHECK(fb(m, k) > 0.0);
  }
  FeatureConfig bad;
  bad.fmax = 9000;
  CHECK_THROWS_AS(mel_filterbank_matrix(bad), Error);
}

TEST_CASE("1 kHz sine peaks in the filter centred nearest 1 kHz") {
  const auto r = testing::mel_peak_1khz();
  CHECK(r.oracle_best == r.nearest);
  CHECK(r.library_best == r.nearest);

  const auto clip = sine(1000.0, 0.5);
  FeatureConfig full;
  full.n_ceps = 26;
  CHECK(extract_static_mfcc(clip, FeatureConfig{})(10, 0) == doctest::Approx(extract_static_mfcc(clip, full)(10, 0)));
}

TEST_CASE("DCT-II rows are orthonormal") {
  const auto d = dct_matrix(13, 26);
  for (std::size_t i = 0; i < 13; ++i)
    for (std::size_t j = 0; j < 13; ++j) {
      double dot = 0;
      for (std::size_t m = 0; m < 26; ++m) dot += d(i, m) * d(j, m);
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
}

TEST_CASE("Hamming window endpoints and centre") {
  const auto w = hamming_window(400);
  CHECK(w[0] == doctest::Approx(0.08));
  CHECK(w[399] == doctest::Approx(0.08));
  CHECK(w[200] == doctest::Approx(0.54 - 0.46 * std::cos(2 * std::numbers::pi * 200 / 399)));
}

TEST_CASE("frame count formula") {
  FeatureConfig cfg;
  const auto m = extract_static_mfcc(noise(32000, 1), cfg);
  CHECK(m.rows() == 198);
  CHECK(m.cols() == 13);
  CHECK(extract_static_mfcc(noise(400, 1), cfg).rows() == 1);
  try {
    extract_static_mfcc(noise(399, 1), cfg);
    FAIL("expected ClipTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ClipTooShort);
  }
}

TEST_CASE("silence: identical frames, c0 from the log floor, higher cepstra zero") {
  FeatureConfig cfg;
  AudioClip zero{std::vector<double>(8000, 0.0), 16000, 1, {}};
  const auto m = extract_static_mfcc(zero, cfg);
  const double c0 = std::sqrt(26.0) * std::log(1e-10);
  for (std::size_t t = 0; t < m.rows(); ++t) {
    CHECK(m(t, 0) == doctest::Approx(c0).epsilon(1e-12));
    for (std::size_t k = 1; k < 13; ++k) CHECK(std::abs(m(t, k)) < 1e-9);
  }
}

TEST_CASE("deltas") {
  SUBCASE("constant sequence") {
    Matrix c(10, 13, 4.2);
    const auto d = append_deltas(c, 2);
    CHECK(d.cols() == 39);
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t j = 13; j < 39; ++j) CHECK(d(t, j) == 0.0);
  }
  SUBCASE("ramp has unit slope in the interior") {
    Matrix c(12, 1);
    for (std::size_t t = 0; t < 12; ++t) c(t, 0) = static_cast<double>(t);
    const auto d = append_deltas(c, 2);
    for (std::size_t t = 2; t < 10; ++t) CHECK(d(t, 1) == doctest::Approx(1.0));
    // Replicate padding at the left edge: (1*(1-0) + 2*(2-0)) / 10.
    CHECK(d(0, 1) == doctest::Approx(0.5));
    // (1*(2-0) + 2*(3-0)) / 10
    CHECK(d(1, 1) == doctest::Approx(0.8));
    // Second derivative of a ramp vanishes where the first is flat.
    for (std::size_t t = 4; t < 8; ++t) CHECK(d(t, 2) == doctest::Approx(0.0));
  }
  SUBCASE("linearity") {
    Rng rng(3);
    auto a = testing::random_matrix(15, 4, rng);
    auto b = testing::random_matrix(15, 4, rng);
    Matrix s(15, 4);
    for (std::size_t i = 0; i < s.data().size(); ++i) s.data()[i] = 2 * a.data()[i] - 3 * b.data()[i];
    const auto da = append_deltas(a, 2), db = append_deltas(b, 2), ds = append_deltas(s, 2);
    for (std::size_t i = 0; i < ds.data().size(); ++i)
      CHECK(ds.data()[i] == doctest::Approx(2 * da.data()[i] - 3 * db.data()[i]));
  }
}

TEST_CASE("fix_length pads, crops and passes through") {
  Matrix m198(198, 39, 1.0);
  auto p = fix_length(m198, 199);
  CHECK(p.rows() == 199);
  for (std::size_t j = 0; j < 39; ++j) {
    CHECK(p(197, j) == 1.0);
    CHECK(p(198, j) == 0.0);
  }
  Matrix m250(250, 39);
  for (std::size_t t = 0; t < 250; ++t)
    for (std::size_t j = 0; j < 39; ++j) m250(t, j) = static_cast<double>(t);
  auto c = fix_length(m250, 199);
  CHECK(c.rows() == 199);
  CHECK(c(0, 0) == 25.0);
  CHECK(c(198, 5) == 223.0);
  Matrix m199(199, 39, 3.0);
  CHECK(fix_length(m199, 199) == m199);
}

TEST_CASE("normalizer") {
  Rng rng(17);
  std::vector<Matrix> feats;
  for (int i = 0; i < 4; ++i) {
    auto m = testing::random_matrix(30 + i, 5, rng);
    for (std::size_t t = 0; t < m.rows(); ++t) {
      m(t, 1) = 7.0;
      m(t, 2) = 100 + 3 * m(t, 2);
    }
    feats.push_back(m);
  }
  const auto stats = fit_normalizer(feats);
  CHECK(stats.std[1] == NormalizerStats::kMinStd);
  std::vector<double> sum(5, 0), sq(5, 0);
  std::size_t n = 0;
  for (const auto& f : feats) {
    const auto z = apply_normalizer(f, stats);
    for (std::size_t t = 0; t < z.rows(); ++t)
      for (std::size_t j = 0; j < 5; ++j) {
        sum[j] += z(t, j);
        sq[j] += z(t, j) * z(t, j);
      }
    n += z.rows();
    for (std::size_t t = 0; t < z.rows(); ++t) CHECK(z(t, 1) == 0.0);
  }
  for (std::size_t j : {0, 2, 3, 4}) {
    CHECK(std::abs(sum[j] / n) < 1e-6);
    CHECK(std::abs(std::sqrt(sq[j] / n) - 1.0) < 1e-6);
  }

  NormalizerStats simple{{1.0}, {2.0}};
  Matrix three(1, 1, 3.0);
  CHECK(apply_normalizer(three, simple)(0, 0) == 1.0);

  const auto z = apply_normalizer(feats[0], stats);
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t j : {0, 2}) CHECK(std::abs(stats.std[j] * z(t, j) + stats.mean[j] - feats[0](t, j)) < 1e-12);

  std::vector<Matrix> none;
  CHECK_THROWS_AS(fit_normalizer(none), Error);
  Matrix wrong(3, 4);
  CHECK_THROWS_AS(apply_normalizer(wrong, stats), Error);
}

TEST_CASE("extract_features yields 199x39 for 0.5 s to 10 s clips") {
  FeatureConfig cfg;
  for (double seconds : {0.025, 0.5, 1.0, 1.99, 2.0, 3.7, 10.0}) {
    const auto f = extract_features(noise(static_cast<std::size_t>(seconds * 16000), 99), cfg);
    CHECK(f.values.rows() == 199);
    CHECK(f.values.cols() == 39);
    for (double v : f.values.data()) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("1 s clip pads 101 rows after normalization") {
  FeatureConfig cfg;
  const auto clip = noise(16000, 4);
  const auto raw = extract_raw_features(clip, cfg);
  const NormalizerStats stats = fit_normalizer(std::span<const Matrix>(&raw, 1));
  const auto f = extract_features(clip, cfg, stats);
  CHECK(f.frame_count_raw == 98);
  for (std::size_t t = 98; t < 199; ++t)
    for (std::size_t j = 0; j < 39; ++j) REQUIRE(f.values(t, j) == 0.0);
  const auto again = extract_features(clip, cfg, stats);
  CHECK(again.values == f.values);
}

TEST_CASE("other sample rates and stereo are converted first") {
  FeatureConfig cfg;
  auto c = sine(440, 1.0, 44100);
  AudioClip stereo;
  stereo.sample_rate = 44100;
  stereo.channels = 2;
  for (double s : c.samples) {
    stereo.samples.push_back(s);
    stereo.samples.push_back(s);
  }
  const auto f = extract_features(stereo, cfg);
  CHECK(f.values.rows() == 199);
  CHECK(f.frame_count_raw == 98);
  AudioClip at8k = sine(440, 1.0, 8000);
  CHECK_THROWS_AS(extract_static_mfcc(at8k, cfg), Error);
}

TEST_CASE("feature cache round trips float32 values") {
  testing::TempDir dir("cache");
  Rng rng(8);
  auto m = testing::random_matrix(199, 39, rng);
  for (auto& v : m.data()) v = static_cast<float>(v);
  write_feature_cache(dir.path() / "a.emof", m);
  CHECK(read_feature_cache(dir.path() / "a.emof") == m);
}

TEST_CASE("config validation") {
  FeatureConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.nfft = 256;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.n_ceps = 30;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.target_frames = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(cfg.feature_dim() == 39);
}
