#include "core/kspace.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace uqr::kspace {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

ComplexGrid transform(const ComplexGrid& in, int sign) {
  const std::size_t h = in.height(), w = in.width();
  if (!is_power_of_two(h) || !is_power_of_two(w))
    throw UnsupportedSize("fft2 needs power-of-two extents, got " + std::to_string(h) + "x" + std::to_string(w));
  ComplexGrid out(h, w);
  ComplexGrid src = in;  // FFTW_ESTIMATE leaves inputs intact, but planning takes non-const pointers
  auto* ip = reinterpret_cast<fftw_complex*>(src.values().data());
  auto* op = reinterpret_cast<fftw_complex*>(out.values().data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), ip, op, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (Complex& c : out.values()) c *= scale;
  return out;
}

ComplexGrid to_complex(const ImageGrid& image) {
  ComplexGrid g(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) g[i] = Complex(image[i], 0.0);
  return g;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

ComplexGrid fft2(const ImageGrid& image) { return transform(to_complex(image), FFTW_FORWARD); }
ComplexGrid fft2(const ComplexGrid& grid) { return transform(grid, FFTW_FORWARD); }
ComplexGrid ifft2(const ComplexGrid& spectrum) { return transform(spectrum, FFTW_BACKWARD); }

ImageGrid real_part(const ComplexGrid& grid) {
  ImageGrid out(grid.height(), grid.width());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = grid[i].real();
  return out;
}

ImageGrid magnitude(const ComplexGrid& grid) {
  ImageGrid out(grid.height(), grid.width());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = std::abs(grid[i]);
  return out;
}

std::size_t raw_row(std::size_t centred_line, std::size_t height) { return (centred_line + height / 2) % height; }

}  // namespace uqr::kspace
