#pragma once

#include <complex>
#include <span>
#include <vector>

namespace fudnn {

// Thin wrappers over FFTW (double precision, unnormalized transforms).
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> in);
std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> in);  // scaled by 1/n
std::vector<std::complex<double>> rfft(std::span<const double> in);                // n/2 + 1 bins

} // namespace fudnn
