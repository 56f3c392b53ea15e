#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "emostress/matrix.hpp"

namespace emostress {

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j is the eigenvector for values[j]
  std::size_t sweeps = 0;
};

// Cyclic Jacobi with row-major sweep order; deterministic for a given input.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tolerance = 1e-14, std::size_t max_sweeps = 100);

struct PcaModel {
  std::vector<double> mean;         // d
  Matrix components;                // k x d, orthonormal rows, eigenvalue-descending
  std::vector<double> eigenvalues;  // k
  double total_variance = 0.0;      // trace of the covariance

  std::size_t dims() const { return mean.size(); }
  std::size_t rank() const { return components.rows(); }
};

// Covariance with divisor n - 1. Each component is oriented so that its
// largest-magnitude entry (first on ties) is positive.
PcaModel fit_pca(const Matrix& samples, std::size_t k = 3);

std::vector<double> project(const PcaModel& pca, std::span<const double> x);
std::vector<double> back_project(const PcaModel& pca, std::span<const double> coords);

std::vector<double> explained_variance_ratios(const PcaModel& pca);

}  // namespace emostress
