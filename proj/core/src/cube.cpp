#include "emostress/cube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emostress/error.hpp"

namespace emostress {

namespace {

constexpr std::array<std::string_view, 8> kNames = {"Shame",           "Distress", "Fear", "Anger",
                                                    "ContemptDisgust", "Surprise", "Joy",  "Interest"};

constexpr std::array<Vec3, 8> kCorners = {{
    {-1, -1, -1},  // Shame
    {-1, +1, -1},  // Distress
    {+1, -1, -1},  // Fear
    {+1, +1, -1},  // Anger
    {-1, -1, +1},  // ContemptDisgust
    {-1, +1, +1},  // Surprise
    {+1, -1, +1},  // Joy
    {+1, +1, +1},  // Interest
}};

double squared_distance(const Vec3& a, const Vec3& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Vec3 apply_signed_permutation(const CubeCalibration& cal, const Vec3& p) {
  Vec3 out{};
  for (std::size_t i = 0; i < 3; ++i) out[cal.permutation[i]] = cal.signs[i] * p[i];
  return out;
}

}  // namespace

std::string_view to_string(CubeEmotion e) { return kNames.at(static_cast<std::size_t>(e)); }

std::optional<CubeEmotion> cube_emotion_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<CubeEmotion>(i);
  return std::nullopt;
}

Vec3 corner_coordinates(CubeEmotion e) { return kCorners.at(static_cast<std::size_t>(e)); }

std::vector<CubeCalibration> signed_permutations() {
  std::vector<CubeCalibration> all;
  std::array<std::uint8_t, 3> perm{0, 1, 2};
  do {
    for (unsigned mask = 0; mask < 8; ++mask) {
      CubeCalibration c;
      c.permutation = perm;
      for (std::size_t i = 0; i < 3; ++i) c.signs[i] = (mask >> i) & 1u ? -1 : 1;
      all.push_back(c);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return all;
}

CubeCalibration compose(const CubeCalibration& outer, const CubeCalibration& inner) {
  // outer(inner(p)): inner sends axis i to inner.perm[i] with sign inner.signs[i].
  CubeCalibration c;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto mid = inner.permutation[i];
    c.permutation[i] = outer.permutation[mid];
    c.signs[i] = static_cast<std::int8_t>(inner.signs[i] * outer.signs[mid]);
  }
  c.scale = outer.scale * inner.scale;
  return c;
}

CubeCalibration inverse(const CubeCalibration& cal) {
  CubeCalibration inv;
  for (std::size_t i = 0; i < 3; ++i) {
    inv.permutation[cal.permutation[i]] = static_cast<std::uint8_t>(i);
    inv.signs[cal.permutation[i]] = cal.signs[i];
  }
  inv.scale = 1.0 / cal.scale;
  return inv;
}

CubeCalibration calibrate(std::span<const CalibrationPoint> points, const CalibrationOptions& opts) {
  if (points.size() < 3) {
    throw Error(Errc::TooFewCentroids, "calibration needs >= 3 centroids, got " + std::to_string(points.size()));
  }
  for (const auto& p : points)
    for (double v : p.centroid)
      if (!std::isfinite(v)) throw Error(Errc::DegenerateData, "non-finite calibration centroid");

  double centroid_norm = 0.0;
  for (const auto& p : points) centroid_norm += squared_distance(p.centroid, {0, 0, 0});

  std::optional<CubeCalibration> best;
  for (auto candidate : signed_permutations()) {
    if (opts.fit_scale) {
      // argmin_s sum ||s R c - q||^2 = sum <R c, q> / sum ||c||^2
      double cross = 0.0;
      for (const auto& p : points) {
        const auto rc = apply_signed_permutation(candidate, p.centroid);
        const auto q = corner_coordinates(p.target);
        for (std::size_t i = 0; i < 3; ++i) cross += rc[i] * q[i];
      }
      if (!(centroid_norm > 0.0) || !(cross > 0.0)) continue;
      candidate.scale = cross / centroid_norm;
    }
    double residual = 0.0;
    for (const auto& p : points) {
      auto mapped = apply_signed_permutation(candidate, p.centroid);
      for (auto& v : mapped) v *= candidate.scale;
      residual += squared_distance(mapped, corner_coordinates(p.target));
    }
    candidate.residual = residual;
    if (!best || residual < best->residual) best = candidate;
  }
  if (!best) throw Error(Errc::DegenerateData, "no signed permutation admits a positive scale");
  return *best;
}

CubeCalibration calibrate(const std::map<CorpusEmotion, Vec3>& centroids,
                          const std::map<CorpusEmotion, CubeEmotion>& label_to_corner, const CalibrationOptions& opts) {
  std::vector<CalibrationPoint> points;
  for (const auto& [label, centroid] : centroids) {
    const auto it = label_to_corner.find(label);
    if (it == label_to_corner.end()) {
      throw Error(Errc::MissingEmotion, std::string(to_string(label)) + " has no cube corner");
    }
    points.push_back({it->second, centroid});
  }
  return calibrate(points, opts);
}

std::map<CorpusEmotion, CubeEmotion> default_label_to_corner() {
  return {{CorpusEmotion::Angry, CubeEmotion::Anger},
          {CorpusEmotion::Happy, CubeEmotion::Joy},
          {CorpusEmotion::Fear, CubeEmotion::Fear},
          {CorpusEmotion::Disgust, CubeEmotion::ContemptDisgust}};
}

NeurotransmitterLevels map_to_cube(const CubeCalibration& cal, const Vec3& point) {
  auto out = apply_signed_permutation(cal, point);
  for (auto& v : out) v *= cal.scale;
  return NeurotransmitterLevels::from(out);
}

std::array<double, 8> corner_distances(const NeurotransmitterLevels& levels) {
  std::array<double, 8> d{};
  const auto p = levels.as_array();
  for (std::size_t c = 0; c < 8; ++c) d[c] = std::sqrt(squared_distance(p, kCorners[c]));
  return d;
}

NearestCorner nearest_corner(const NeurotransmitterLevels& levels) {
  const auto p = levels.as_array();
  std::array<double, 8> sq{};
  for (std::size_t c = 0; c < 8; ++c) sq[c] = squared_distance(p, kCorners[c]);
  std::size_t best = 0;
  for (std::size_t c = 1; c < 8; ++c)
    if (sq[c] < sq[best]) best = c;
  NearestCorner r;
  r.emotion = kCubeEmotions[best];
  r.distance = std::sqrt(sq[best]);
  for (std::size_t c = 0; c < 8; ++c)
    if (c != best && sq[c] == sq[best]) r.tie = true;
  return r;
}

std::array<double, 8> corner_weights(const NeurotransmitterLevels& levels, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(Errc::InvalidTau, "tau must be positive and finite");
  const auto p = levels.as_array();
  std::array<double, 8> sq{};
  for (std::size_t c = 0; c < 8; ++c) sq[c] = squared_distance(p, kCorners[c]);
  const double shift = *std::min_element(sq.begin(), sq.end());
  const double t2 = tau * tau;
  std::array<double, 8> w{};
  double sum = 0.0;
  for (std::size_t c = 0; c < 8; ++c) sum += w[c] = std::exp(-(sq[c] - shift) / t2);
  for (auto& v : w) v /= sum;
  return w;
}

StressResult stress_score(const NeurotransmitterLevels& levels, double tau, std::optional<double> threshold) {
  const auto weights = corner_weights(levels, tau);
  const auto nearest = nearest_corner(levels);
  StressResult r;
  r.levels = levels;
  r.distance_to_distress = std::sqrt(squared_distance(levels.as_array(), corner_coordinates(CubeEmotion::Distress)));
  r.score = weights[static_cast<std::size_t>(CubeEmotion::Distress)];
  r.nearest = nearest.emotion;
  r.tie = nearest.tie;
  r.is_stressed = threshold ? r.score >= *threshold : nearest.emotion == CubeEmotion::Distress;
  return r;
}

}  // namespace emostress
