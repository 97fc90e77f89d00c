#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "san/tensor.hpp"

namespace san {

// Convention: unnormalized forward transform
//   X[u,v] = sum_{p,q} x[p,q] exp(-2 pi i (u p / H + v q / W)),
// inverse scaled by 1/(H W). With this choice the peak magnitude of a kernel's
// spectrum is the operator norm of cyclic convolution by that kernel.

bool is_power_of_two(std::size_t n);

/// Forward DFT of `input` zero-padded (bottom/right) to height x width.
/// Radix-2 when both sizes are powers of two, direct summation otherwise.
ComplexSpectrum fft2(PlaneView input, std::size_t height, std::size_t width);

/// Direct O((HW)^2) double-sum DFT; the reference for fft2.
ComplexSpectrum naive_dft2(PlaneView input, std::size_t height, std::size_t width);

ComplexSpectrum fft2(const ComplexSpectrum& input);
ComplexSpectrum ifft2(const ComplexSpectrum& input);

/// In-place 2-D transform of a row-major complex grid.
void fft2_inplace(std::vector<std::complex<double>>& grid, std::size_t height, std::size_t width,
                  bool inverse);

}  // namespace san
