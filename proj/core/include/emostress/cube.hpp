#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "emostress/labels.hpp"

namespace emostress {

using Vec3 = std::array<double, 3>;

// The eight corner emotions of the neurotransmitter cube, in canonical
// enumeration order (used for every tie-break in this module).
enum class CubeEmotion : std::uint8_t { Shame, Distress, Fear, Anger, ContemptDisgust, Surprise, Joy, Interest };

inline constexpr std::array<CubeEmotion, 8> kCubeEmotions = {
    CubeEmotion::Shame,           CubeEmotion::Distress, CubeEmotion::Fear, CubeEmotion::Anger,
    CubeEmotion::ContemptDisgust, CubeEmotion::Surprise, CubeEmotion::Joy,  CubeEmotion::Interest};

std::string_view to_string(CubeEmotion e);
std::optional<CubeEmotion> cube_emotion_from_string(std::string_view name);

// (dopamine, noradrenaline, serotonin) in {-1, +1}^3.
Vec3 corner_coordinates(CubeEmotion e);

// Cube coordinates; unbounded, values outside [-1, 1] are legitimate.
struct NeurotransmitterLevels {
  double dopamine = 0.0;
  double noradrenaline = 0.0;
  double serotonin = 0.0;

  static NeurotransmitterLevels from(const Vec3& v) { return {v[0], v[1], v[2]}; }
  Vec3 as_array() const { return {dopamine, noradrenaline, serotonin}; }
};

// Signed axis permutation (with optional isotropic scale):
//   out[permutation[i]] = scale * signs[i] * in[i]
struct CubeCalibration {
  std::array<std::uint8_t, 3> permutation{0, 1, 2};
  std::array<std::int8_t, 3> signs{1, 1, 1};
  double scale = 1.0;
  double residual = 0.0;

  bool same_transform(const CubeCalibration& other) const {
    return permutation == other.permutation && signs == other.signs && scale == other.scale;
  }
};

// All 48 signed permutations with scale 1, in canonical order: permutations in
// lexicographic order, and for each, sign masks 0..7 where bit i flips axis i.
std::vector<CubeCalibration> signed_permutations();

CubeCalibration compose(const CubeCalibration& outer, const CubeCalibration& inner);
CubeCalibration inverse(const CubeCalibration& cal);

struct CalibrationPoint {
  CubeEmotion target;
  Vec3 centroid;
};

struct CalibrationOptions {
  bool fit_scale = false;
};

// Exhaustive search over the 48 signed permutations minimizing
// sum ||T(c) - corner||^2. The first candidate in canonical order wins ties.
CubeCalibration calibrate(std::span<const CalibrationPoint> points, const CalibrationOptions& opts = {});

// Class-level convenience: each centroid's emotion class is mapped to a corner
// through `label_to_corner`; classes without a corner raise MissingEmotion.
CubeCalibration calibrate(const std::map<CorpusEmotion, Vec3>& centroids,
                          const std::map<CorpusEmotion, CubeEmotion>& label_to_corner,
                          const CalibrationOptions& opts = {});

// Angry->Anger, Happy->Joy, Fear->Fear, Disgust->ContemptDisgust.
std::map<CorpusEmotion, CubeEmotion> default_label_to_corner();

NeurotransmitterLevels map_to_cube(const CubeCalibration& cal, const Vec3& point);

struct NearestCorner {
  CubeEmotion emotion = CubeEmotion::Shame;
  double distance = 0.0;
  bool tie = false;
};

std::array<double, 8> corner_distances(const NeurotransmitterLevels& levels);
NearestCorner nearest_corner(const NeurotransmitterLevels& levels);

// Softmin weights exp(-d_c^2 / tau^2) over the corners, normalized to sum to 1.
std::array<double, 8> corner_weights(const NeurotransmitterLevels& levels, double tau = 1.0);

struct StressResult {
  NeurotransmitterLevels levels;
  double distance_to_distress = 0.0;
  double score = 0.0;
  CubeEmotion nearest = CubeEmotion::Shame;
  bool is_stressed = false;
  bool tie = false;
};

// is_stressed: score >= threshold when a threshold is given, otherwise
// "the nearest corner is Distress".
StressResult stress_score(const NeurotransmitterLevels& levels, double tau = 1.0,
                          std::optional<double> threshold = std::nullopt);

}  // namespace emostress
