#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "core/grid.hpp"

namespace uqr::phantom {

enum Label : std::uint8_t { Background = 0, Core = 1, Ribbon = 2, Skull = 3 };

struct PhantomConfig {
  std::size_t size = 64;
  int min_ellipses = 3;
  int max_ellipses = 6;
  int ribbon_thickness = 2;
  int skull_thickness = 3;
  // Indexed by Label.
  std::array<double, 4> class_mean{0.05, 0.85, 0.55, 0.70};
  std::array<double, 4> texture_amplitude{0.02, 0.06, 0.06, 0.08};
  int smoothing_radius = 2;

  void validate() const;
  bool operator==(const PhantomConfig&) const = default;
};

struct Phantom {
  ImageGrid image;
  LabelGrid labels;
  std::uint64_t seed = 0;
};

// Deterministic in (config, seed). The head sits in the upper part of the
// field of view so the bottom quarter never contains ribbon pixels.
Phantom generate(const PhantomConfig& config, std::uint64_t seed);

// Binary mask of the ribbon class, the segmentation target.
MaskGrid ribbon_mask(const LabelGrid& labels);

struct SeedSplit {
  std::vector<std::uint64_t> train, valid, test;
};

struct SplitFractions {
  double train = 0.8, valid = 0.1, test = 0.1;
};

// Contiguous, order-preserving partition: valid and test sizes are
// floor(fraction * n), train takes the remainder.
SeedSplit split(std::span<const std::uint64_t> seeds, SplitFractions fractions = {});

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

}  // namespace uqr::phantom
