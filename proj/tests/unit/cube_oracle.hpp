#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "emostress/cube.hpp"
#include "emostress/rng.hpp"

namespace testing {

using emostress::CubeEmotion;
using emostress::Vec3;

// (D, N, S) corners written out independently of the library table.
inline Vec3 oracle_corner(CubeEmotion e) {
  switch (e) {
    case CubeEmotion::Shame: return {-1, -1, -1};
    case CubeEmotion::Distress: return {-1, 1, -1};
    case CubeEmotion::Fear: return {1, -1, -1};
    case CubeEmotion::Anger: return {1, 1, -1};
    case CubeEmotion::ContemptDisgust: return {-1, -1, 1};
    case CubeEmotion::Surprise: return {-1, 1, 1};
    case CubeEmotion::Joy: return {1, -1, 1};
    case CubeEmotion::Interest: return {1, 1, 1};
  }
  return {};
}

struct SignedPerm {
  std::array<int, 3> perm;
  std::array<int, 3> sign;

  Vec3 apply(const Vec3& in) const {
    Vec3 out{};
    for (int i = 0; i < 3; ++i) out[perm[i]] = sign[i] * in[i];
    return out;
  }
  SignedPerm inverse() const {
    SignedPerm q{};
    for (int i = 0; i < 3; ++i) {
      q.perm[perm[i]] = i;
      q.sign[perm[i]] = sign[i];
    }
    return q;
  }
  bool matches(const emostress::CubeCalibration& c) const {
    for (int i = 0; i < 3; ++i)
      if (c.permutation[i] != perm[i] || c.signs[i] != sign[i]) return false;
    return true;
  }
};

inline std::vector<SignedPerm> all_signed_perms() {
  std::vector<SignedPerm> out;
  std::array<int, 3> p{0, 1, 2};
  do {
    for (int mask = 0; mask < 8; ++mask)
      out.push_back({p, {mask & 1 ? -1 : 1, mask & 2 ? -1 : 1, mask & 4 ? -1 : 1}});
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double sq_dist(const Vec3& a, const Vec3& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

struct OracleFit {
  SignedPerm best;
  double residual;
};

inline OracleFit oracle_calibrate(const std::vector<std::pair<CubeEmotion, Vec3>>& points) {
  OracleFit fit{{}, std::numeric_limits<double>::infinity()};
  for (const auto& cand : all_signed_perms()) {
    double r = 0;
    for (const auto& [e, c] : points) r += sq_dist(cand.apply(c), oracle_corner(e));
    if (r < fit.residual) fit = {cand, r};
  }
  return fit;
}

inline CubeEmotion oracle_nearest(const Vec3& p) {
  CubeEmotion best = CubeEmotion::Shame;
  double bd = std::numeric_limits<double>::infinity();
  for (auto e : emostress::kCubeEmotions) {
    const double d = sq_dist(p, oracle_corner(e));
    if (d < bd) {
      bd = d;
      best = e;
    }
  }
  return best;
}

inline SignedPerm random_signed_perm(emostress::Rng& rng) {
  SignedPerm p{{0, 1, 2}, {1, 1, 1}};
  rng.shuffle(std::span<int>(p.perm));
  for (auto& s : p.sign) s = rng.uniform() < 0.5 ? -1 : 1;
  return p;
}

// Plant P on the four default calibration corners with uniform noise in
// [-0.2, 0.2] per axis; success when calibrate returns exactly P^-1.
inline bool calibration_recovery_trial(std::uint64_t seed) {
  emostress::Rng rng(seed);
  const auto planted = random_signed_perm(rng);
  std::vector<emostress::CalibrationPoint> pts;
  for (auto e : {CubeEmotion::Anger, CubeEmotion::Joy, CubeEmotion::Fear, CubeEmotion::ContemptDisgust}) {
    Vec3 c = planted.apply(oracle_corner(e));
    for (auto& v : c) v += 0.4 * rng.uniform() - 0.2;
    pts.push_back({e, c});
  }
  return planted.inverse().matches(emostress::calibrate(pts));
}

// Published centroid coordinates with their labelled corners.
inline std::vector<std::pair<CubeEmotion, Vec3>> reference_centroid_rows() {
  return {{CubeEmotion::Anger, {1.49, 0.58, -0.21}},
          {CubeEmotion::Joy, {0.16, -2.00, 0.69}},
          {CubeEmotion::Fear, {0.19, -0.68, -1.77}},
          {CubeEmotion::ContemptDisgust, {-0.34, -0.14, 0.16}}};
}

}  // namespace testing
