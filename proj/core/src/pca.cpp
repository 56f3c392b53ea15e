#include "emostress/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emostress/error.hpp"

namespace emostress {

SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tolerance, std::size_t max_sweeps) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) throw Error(Errc::ShapeMismatch, "jacobi_eigen needs a square matrix");

  Matrix a = symmetric;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data()) scale += x * x;
  scale = std::sqrt(scale);

  SymmetricEigen result;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tolerance * scale || off == 0.0) break;
    ++result.sweeps;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation annihilating a(p,q); t is the smaller root of t^2 + 2*theta*t - 1 = 0.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  result.values.resize(n);
  result.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    result.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) result.vectors(i, j) = v(i, order[j]);
  }
  return result;
}

PcaModel fit_pca(const Matrix& samples, std::size_t k) {
  const std::size_t n = samples.rows(), d = samples.cols();
  if (n < 2) throw Error(Errc::TooFewSamples, "PCA needs at least 2 samples, got " + std::to_string(n));
  if (k == 0 || k > d) throw Error(Errc::InvalidConfig, "PCA rank must be in [1, " + std::to_string(d) + "]");

  PcaModel pca;
  pca.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) pca.mean[j] += samples(r, j);
  for (auto& m : pca.mean) m /= static_cast<double>(n);

  Matrix cov(d, d);
  std::vector<double> centred(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) centred[j] = samples(r, j) - pca.mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centred[i];
      if (ci == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) cov(i, j) += ci * centred[j];
    }
  }
  const double divisor = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) cov(j, i) = cov(i, j) = cov(i, j) / divisor;

  for (std::size_t i = 0; i < d; ++i) pca.total_variance += cov(i, i);
  if (!(pca.total_variance > 0.0)) throw Error(Errc::DegenerateData, "all samples are identical");

  const auto eig = jacobi_eigen(cov);
  pca.components = Matrix(k, d);
  pca.eigenvalues.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    pca.eigenvalues[c] = std::max(eig.values[c], 0.0);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(eig.vectors(i, c)) > std::abs(eig.vectors(peak, c))) peak = i;
    const double sign = eig.vectors(peak, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) pca.components(c, i) = sign * eig.vectors(i, c);
  }
  return pca;
}

std::vector<double> project(const PcaModel& pca, std::span<const double> x) {
  if (x.size() != pca.dims()) {
    throw Error(Errc::ShapeMismatch, "PCA expects " + std::to_string(pca.dims()) + "-d input, got " +
                                         std::to_string(x.size()));
  }
  std::vector<double> out(pca.rank(), 0.0);
  for (std::size_t c = 0; c < pca.rank(); ++c) {
    const auto comp = pca.components.row(c);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += comp[i] * (x[i] - pca.mean[i]);
    out[c] = acc;
  }
  return out;
}

std::vector<double> back_project(const PcaModel& pca, std::span<const double> coords) {
  if (coords.size() != pca.rank()) throw Error(Errc::ShapeMismatch, "coordinate count does not match PCA rank");
  std::vector<double> out = pca.mean;
  for (std::size_t c = 0; c < pca.rank(); ++c) {
    const auto comp = pca.components.row(c);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coords[c] * comp[i];
  }
  return out;
}

std::vector<double> explained_variance_ratios(const PcaModel& pca) {
  if (!(pca.total_variance > 0.0)) throw Error(Errc::DegenerateData, "total variance is zero");
  std::vector<double> r(pca.eigenvalues.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::clamp(pca.eigenvalues[i] / pca.total_variance, 0.0, 1.0);
  return r;
}

}  // namespace emostress
