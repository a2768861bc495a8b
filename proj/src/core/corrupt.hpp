#pragma once

// Artefact engine: Rician noise, segmented k-space motion, multiplicative
// bias fields and mask-restricted corruption, chained by recipes.
//
// Every stochastic step draws from a stream derived from (seed, step index),
// so a recipe applied with the same seed is bit-identical regardless of
// which thread or process runs it.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "core/grid.hpp"
#include "core/kspace.hpp"
#include "core/rng.hpp"

namespace uqr::corrupt {

// snr_db at or above this value means zero noise.
inline constexpr double kNoiseFreeSnrDb = 300.0;

// sigma_g = RMS(image) * 10^(-snr_db / 20)
double noise_sigma(const ImageGrid& image, double snr_db);

// sqrt((x + n1)^2 + n2^2), n1, n2 ~ N(0, sigma^2). sigma == 0 returns |x|.
ImageGrid apply_rician_sigma(const ImageGrid& image, double sigma, std::uint64_t seed);
ImageGrid apply_rician(const ImageGrid& image, double snr_db, std::uint64_t seed);

struct MotionSegment {
  std::size_t line_begin = 0;  // centred phase-encode lines [begin, end)
  std::size_t line_end = 0;
  double shift_rows = 0;       // translation in pixels
  double shift_cols = 0;
  double rotation_deg = 0;     // about the image centre
  bool operator==(const MotionSegment&) const = default;
};

// Clean spectrum with each segment's lines taken from the spectrum of the
// rigidly moved image.
kspace::ComplexGrid motion_spectrum(const ImageGrid& image, const std::vector<MotionSegment>& segments);
// Magnitude image of motion_spectrum; zero segments return the input.
ImageGrid apply_motion(const ImageGrid& image, const std::vector<MotionSegment>& segments);

ImageGrid rotate_bilinear(const ImageGrid& image, double degrees);

// Number of monomials of a 2D polynomial of the given total order.
std::size_t bias_coefficient_count(int order);
// image * exp(P(u, v)), u along columns and v along rows, both in [-1, 1].
// Monomials ordered by degree d, then u^(d-j) v^j for j = 0..d.
ImageGrid apply_bias(const ImageGrid& image, int order, const std::vector<double>& coefficients);

// ---- recipes ----------------------------------------------------------------

struct MaskSpec {
  enum class Kind { Rect, File, Bitmap };
  Kind kind = Kind::Rect;
  std::size_t row_begin = 0, row_end = 0, col_begin = 0, col_end = 0;
  std::filesystem::path path;
  MaskGrid bitmap;

  static MaskSpec rect(std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);
  static MaskSpec from_file(std::filesystem::path p);
  static MaskSpec from_bitmap(MaskGrid m);

  MaskGrid resolve(std::size_t height, std::size_t width) const;
  bool operator==(const MaskSpec&) const = default;
};

// Rows [3H/4, H) across the full width.
MaskGrid bottom_quarter(std::size_t height, std::size_t width);

struct RicianStep {
  double snr_db = 0;
  bool operator==(const RicianStep&) const = default;
};
struct MotionStep {
  std::vector<MotionSegment> segments;
  bool operator==(const MotionStep&) const = default;
};
struct BiasStep {
  int order = 0;
  std::vector<double> coefficients;
  bool operator==(const BiasStep&) const = default;
};

struct Step;
struct RegionStep {
  MaskSpec mask;
  std::vector<Step> inner;
  bool operator==(const RegionStep&) const;
};

struct Step {
  std::variant<RicianStep, MotionStep, BiasStep, RegionStep> op;
  bool operator==(const Step&) const = default;
};

struct Recipe {
  std::vector<Step> steps;
  bool empty() const { return steps.empty(); }
  bool operator==(const Recipe&) const = default;
};

// Structural checks that need no image: motion ranges ordered and
// disjoint, bias coefficient counts, no k-space step inside a region.
void validate(const Recipe& recipe);

ImageGrid apply_recipe(const ImageGrid& image, const Recipe& recipe, std::uint64_t seed);
ImageGrid apply_steps(const ImageGrid& image, const std::vector<Step>& steps, std::uint64_t seed);

// Pixels with mask 0 keep the input bit-for-bit; pixels with mask 1 take
// the inner steps applied to the whole image with the same seed.
ImageGrid apply_region(const ImageGrid& image, const MaskGrid& mask, const std::vector<Step>& inner,
                       std::uint64_t seed);

// ---- noise ladder -----------------------------------------------------------

struct NoiseLadder {
  double snr_start_db = 10.0;
  double snr_end_db = -10.0;
  std::size_t levels = 41;

  void validate() const;
  double snr_at(std::size_t level) const;
};

struct LadderLevel {
  std::size_t level;
  double snr_db;
  ImageGrid image;
};

std::vector<LadderLevel> ladder(const ImageGrid& image, const NoiseLadder& ladder, std::uint64_t seed);

// ---- training-time sampler --------------------------------------------------

struct CorruptionDistribution {
  double rician_weight = 0.5;
  double motion_weight = 0.3;
  double bias_weight = 0.2;
  // Probability of chaining a second, independently drawn step.
  double compose_probability = 0.2;
  double snr_min_db = -10.0;
  double snr_max_db = 10.0;
  double max_shift_px = 4.0;
  double max_rotation_deg = 3.0;
  double max_bias_coefficient = 0.3;

  void validate() const;
  bool operator==(const CorruptionDistribution&) const = default;
};

Recipe sample_recipe(const CorruptionDistribution& dist, std::size_t height, Rng& rng);

std::string describe(const Recipe& recipe);

}  // namespace uqr::corrupt
