#pragma once

#include <complex>

#include "core/grid.hpp"

namespace uqr::kspace {

using Complex = std::complex<double>;
using ComplexGrid = Grid<Complex>;

// Unitary 2D DFT (1/sqrt(HW) in each direction). Extents must be powers
// of two. Spectra use the raw DFT ordering (DC at index 0).
ComplexGrid fft2(const ImageGrid& image);
ComplexGrid fft2(const ComplexGrid& grid);
ComplexGrid ifft2(const ComplexGrid& spectrum);

ImageGrid real_part(const ComplexGrid& grid);
ImageGrid magnitude(const ComplexGrid& grid);

// Phase-encode line l in centred order (line H/2 holds DC) maps to raw
// spectrum row (l + H/2) mod H.
std::size_t raw_row(std::size_t centred_line, std::size_t height);

// Signed frequency of raw index k on an axis of length n.
inline double signed_frequency(std::size_t k, std::size_t n) {
  return k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

bool is_power_of_two(std::size_t n);

}  // namespace uqr::kspace
