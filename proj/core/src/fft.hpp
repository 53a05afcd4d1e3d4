#pragma once

#include <complex>
#include <span>
#include <vector>

namespace mdeeg::detail {

/// Real-to-complex DFT, n/2 + 1 bins, unnormalized.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft for a length-n signal, normalized so irfft(rfft(x), n) == x.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

}  // namespace mdeeg::detail
