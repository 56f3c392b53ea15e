#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include "emostress/matrix.hpp"
#include "emostress/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("emostress_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Direct O(N^2) DFT power, bins 0..nfft/2.
inline std::vector<double> direct_power_spectrum(const std::vector<double>& frame, std::size_t nfft) {
  std::vector<double> out(nfft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0, im = 0;
    for (std::size_t n = 0; n < frame.size() && n < nfft; ++n) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * n % nfft) / nfft;
      re += frame[n] * std::cos(ang);
      im += frame[n] * std::sin(ang);
    }
    out[k] = static_cast<double>(re * re + im * im);
  }
  return out;
}

inline emostress::Matrix random_matrix(std::size_t rows, std::size_t cols, emostress::Rng& rng) {
  emostress::Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

inline emostress::Matrix multiply(const emostress::Matrix& a, const emostress::Matrix& b) {
  emostress::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline emostress::Matrix transpose(const emostress::Matrix& a) {
  emostress::Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Sample covariance (divisor n - 1), computed the textbook way.
inline emostress::Matrix covariance(const emostress::Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j) / static_cast<double>(n);
  emostress::Matrix c(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) c(a, b) += (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
  for (auto& v : c.data()) v /= static_cast<double>(n - 1);
  return c;
}

// Top-k eigenpairs by power iteration with Hotelling deflation.
struct PowerPairs {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};

inline PowerPairs power_iteration_deflation(emostress::Matrix a, std::size_t k, std::size_t iters = 20000) {
  const std::size_t d = a.rows();
  PowerPairs out;
  for (std::size_t p = 0; p < k; ++p) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i) + 0.01 * static_cast<double>(p);
    double lambda = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) w[i] += a(i, j) * v[j];
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      double delta = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double nv = w[i] / norm;
        delta = std::max(delta, std::abs(nv - v[i]));
        v[i] = nv;
      }
      lambda = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) lambda += v[i] * a(i, j) * v[j];
      if (delta < 1e-15) break;
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) a(i, j) -= lambda * v[i] * v[j];
    out.values.push_back(lambda);
    out.vectors.push_back(v);
  }
  return out;
}

}  // namespace testing
