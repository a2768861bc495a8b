#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace uqr {

// Row-major 2D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), values_(height * width, fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_)
      throw ShapeError("grid " + std::to_string(height_) + "x" + std::to_string(width_) + " given " +
                       std::to_string(values_.size()) + " values");
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& operator()(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  const std::vector<T>& data() const noexcept { return values_; }

  bool same_shape(const Grid& o) const { return height_ == o.height_ && width_ == o.width_; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return height_ == o.height() && width_ == o.width();
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t height_ = 0, width_ = 0;
  std::vector<T> values_;
};

using ImageGrid = Grid<double>;
using LabelGrid = Grid<std::uint8_t>;
using MaskGrid = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const std::string& what) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError(what + ": grids " + std::to_string(a.height()) + "x" + std::to_string(a.width()) + " and " +
                     std::to_string(b.height()) + "x" + std::to_string(b.width()) + " differ");
}

double rms(const ImageGrid& image);
double mse(const ImageGrid& a, const ImageGrid& b);

// "UQG1 <H> <W> <dtype>\n" followed by row-major little-endian values.
// Images are stored as f32, labels and masks as u8.
void save_image(const std::filesystem::path& path, const ImageGrid& image);
void save_labels(const std::filesystem::path& path, const LabelGrid& labels);
ImageGrid load_image(const std::filesystem::path& path);
LabelGrid load_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_image(const ImageGrid& image);
std::vector<std::uint8_t> encode_labels(const LabelGrid& labels);
ImageGrid decode_image(std::span<const std::uint8_t> bytes);
LabelGrid decode_labels(std::span<const std::uint8_t> bytes);

}  // namespace uqr
