#pragma once

#include <complex>
#include <span>
#include <vector>

namespace emostress {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::span<std::complex<double>> data);

// |DFT|^2 of `frame` zero-padded to nfft, bins 0..nfft/2 (no normalization).
std::vector<double> power_spectrum(std::span<const double> frame, std::size_t nfft);

bool is_power_of_two(std::size_t n);

}  // namespace emostress
