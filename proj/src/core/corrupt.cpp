#include "core/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace uqr::corrupt {

using kspace::Complex;
using kspace::ComplexGrid;

// ---- Rician -----------------------------------------------------------------

double noise_sigma(const ImageGrid& image, double snr_db) {
  if (snr_db >= kNoiseFreeSnrDb) return 0.0;
  return rms(image) * std::pow(10.0, -snr_db / 20.0);
}

ImageGrid apply_rician_sigma(const ImageGrid& image, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ContractError("rician: sigma must be finite and non-negative");
  ImageGrid out(image.height(), image.width());
  if (sigma == 0.0) {
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = std::abs(image[i]);
    return out;
  }
  Rng rng = make_rng({seed, 0x52494349u});
  std::normal_distribution<double> normal(0.0, sigma);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double re = image[i] + normal(rng);
    const double im = normal(rng);
    out[i] = std::sqrt(re * re + im * im);
  }
  return out;
}

ImageGrid apply_rician(const ImageGrid& image, double snr_db, std::uint64_t seed) {
  return apply_rician_sigma(image, noise_sigma(image, snr_db), seed);
}

// ---- motion -----------------------------------------------------------------

ImageGrid rotate_bilinear(const ImageGrid& image, double degrees) {
  if (degrees == 0.0) return image;
  const std::size_t h = image.height(), w = image.width();
  const double cy = (static_cast<double>(h) - 1) / 2, cx = (static_cast<double>(w) - 1) / 2;
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  ImageGrid out(h, w, 0.0);
  auto at = [&](long y, long x) {
    return (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w))
               ? 0.0
               : image(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      // Inverse map: sample the source at the point rotated by -t.
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double sy = cy + c * dy - s * dx;
      const double sx = cx + s * dy + c * dx;
      const long y0 = static_cast<long>(std::floor(sy)), x0 = static_cast<long>(std::floor(sx));
      const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
      out(y, x) = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                  fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
    }
  return out;
}

namespace {

void validate_segments(const std::vector<MotionSegment>& segments, std::size_t height) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& s : segments) {
    if (s.line_begin >= s.line_end || s.line_end > height)
      throw RecipeError("motion segment lines [" + std::to_string(s.line_begin) + "," + std::to_string(s.line_end) +
                        ") lie outside [0," + std::to_string(height) + ") or are empty");
    if (!std::isfinite(s.shift_rows) || !std::isfinite(s.shift_cols) || !std::isfinite(s.rotation_deg))
      throw RecipeError("motion segment has a non-finite transform");
    ranges.emplace_back(s.line_begin, s.line_end);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      throw RecipeError("motion segments overlap at line " + std::to_string(ranges[i].first));
}

void validate_segments_structural(const std::vector<MotionSegment>& segments) {
  std::size_t max_end = 0;
  for (const auto& s : segments) max_end = std::max(max_end, s.line_end);
  validate_segments(segments, max_end);
}

}  // namespace

ComplexGrid motion_spectrum(const ImageGrid& image, const std::vector<MotionSegment>& segments) {
  const std::size_t h = image.height(), w = image.width();
  validate_segments(segments, h);
  ComplexGrid spectrum = kspace::fft2(image);
  for (const MotionSegment& seg : segments) {
    ComplexGrid moved = kspace::fft2(rotate_bilinear(image, seg.rotation_deg));
    for (std::size_t line = seg.line_begin; line < seg.line_end; ++line) {
      const std::size_t ky = kspace::raw_row(line, h);
      const double fy = kspace::signed_frequency(ky, h);
      for (std::size_t kx = 0; kx < w; ++kx) {
        const double fx = kspace::signed_frequency(kx, w);
        const double phase = -2.0 * std::numbers::pi *
                             (fy * seg.shift_rows / static_cast<double>(h) + fx * seg.shift_cols / static_cast<double>(w));
        spectrum(ky, kx) = moved(ky, kx) * std::polar(1.0, phase);
      }
    }
  }
  return spectrum;
}

ImageGrid apply_motion(const ImageGrid& image, const std::vector<MotionSegment>& segments) {
  if (segments.empty()) return image;
  return kspace::magnitude(kspace::ifft2(motion_spectrum(image, segments)));
}

// ---- bias -------------------------------------------------------------------

std::size_t bias_coefficient_count(int order) {
  if (order < 0) throw RecipeError("bias order must be non-negative");
  return static_cast<std::size_t>((order + 1) * (order + 2) / 2);
}

ImageGrid apply_bias(const ImageGrid& image, int order, const std::vector<double>& coefficients) {
  if (coefficients.size() != bias_coefficient_count(order))
    throw RecipeError("bias of order " + std::to_string(order) + " needs " +
                      std::to_string(bias_coefficient_count(order)) + " coefficients, got " +
                      std::to_string(coefficients.size()));
  const std::size_t h = image.height(), w = image.width();
  ImageGrid out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const double v = h > 1 ? -1.0 + 2.0 * static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      const double u = w > 1 ? -1.0 + 2.0 * static_cast<double>(x) / static_cast<double>(w - 1) : 0.0;
      double p = 0;
      std::size_t k = 0;
      for (int d = 0; d <= order; ++d)
        for (int j = 0; j <= d; ++j) p += coefficients[k++] * std::pow(u, d - j) * std::pow(v, j);
      out(y, x) = image(y, x) * std::exp(p);
    }
  }
  return out;
}

// ---- masks ------------------------------------------------------------------

MaskSpec MaskSpec::rect(std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  MaskSpec m;
  m.kind = Kind::Rect;
  m.row_begin = r0;
  m.row_end = r1;
  m.col_begin = c0;
  m.col_end = c1;
  return m;
}

MaskSpec MaskSpec::from_file(std::filesystem::path p) {
  MaskSpec m;
  m.kind = Kind::File;
  m.path = std::move(p);
  return m;
}

MaskSpec MaskSpec::from_bitmap(MaskGrid grid) {
  MaskSpec m;
  m.kind = Kind::Bitmap;
  m.bitmap = std::move(grid);
  return m;
}

MaskGrid MaskSpec::resolve(std::size_t height, std::size_t width) const {
  MaskGrid m;
  switch (kind) {
    case Kind::Rect:
      if (row_begin > row_end || col_begin > col_end || row_end > height || col_end > width)
        throw RecipeError("region rect exceeds the " + std::to_string(height) + "x" + std::to_string(width) + " image");
      m = MaskGrid(height, width, 0);
      for (std::size_t y = row_begin; y < row_end; ++y)
        for (std::size_t x = col_begin; x < col_end; ++x) m(y, x) = 1;
      return m;
    case Kind::File: m = load_labels(path); break;
    case Kind::Bitmap: m = bitmap; break;
  }
  if (m.height() != height || m.width() != width) throw ShapeError("region mask shape differs from image shape");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] > 1) throw RecipeError("region mask is not binary at index " + std::to_string(i));
  return m;
}

MaskGrid bottom_quarter(std::size_t height, std::size_t width) {
  return MaskSpec::rect(height - height / 4, height, 0, width).resolve(height, width);
}

// ---- recipes ----------------------------------------------------------------

bool RegionStep::operator==(const RegionStep& o) const { return mask == o.mask && inner == o.inner; }

namespace {

void validate_steps(const std::vector<Step>& steps, bool inside_region) {
  for (const Step& step : steps) {
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, RicianStep>) {
            if (std::isnan(s.snr_db)) throw RecipeError("rician snr_db is NaN");
          } else if constexpr (std::is_same_v<S, MotionStep>) {
            if (inside_region) throw RecipeError("motion is a k-space step and cannot run inside a region");
            validate_segments_structural(s.segments);
          } else if constexpr (std::is_same_v<S, BiasStep>) {
            if (s.coefficients.size() != bias_coefficient_count(s.order))
              throw RecipeError("bias of order " + std::to_string(s.order) + " needs " +
                                std::to_string(bias_coefficient_count(s.order)) + " coefficients, got " +
                                std::to_string(s.coefficients.size()));
          } else {
            validate_steps(s.inner, true);
          }
        },
        step.op);
  }
}

}  // namespace

void validate(const Recipe& recipe) { validate_steps(recipe.steps, false); }

ImageGrid apply_steps(const ImageGrid& image, const std::vector<Step>& steps, std::uint64_t seed) {
  ImageGrid current = image;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const std::uint64_t step_seed = derive_seed({seed, j});
    current = std::visit(
        [&](const auto& s) -> ImageGrid {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, RicianStep>) {
            return apply_rician(current, s.snr_db, step_seed);
          } else if constexpr (std::is_same_v<S, MotionStep>) {
            return apply_motion(current, s.segments);
          } else if constexpr (std::is_same_v<S, BiasStep>) {
            return apply_bias(current, s.order, s.coefficients);
          } else {
            return apply_region(current, s.mask.resolve(current.height(), current.width()), s.inner, step_seed);
          }
        },
        steps[j].op);
  }
  return current;
}

ImageGrid apply_recipe(const ImageGrid& image, const Recipe& recipe, std::uint64_t seed) {
  validate(recipe);
  return apply_steps(image, recipe.steps, seed);
}

ImageGrid apply_region(const ImageGrid& image, const MaskGrid& mask, const std::vector<Step>& inner,
                       std::uint64_t seed) {
  require_same_shape(image, mask, "region");
  validate_steps(inner, true);
  ImageGrid corrupted = apply_steps(image, inner, seed);
  ImageGrid out = image;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i] > 1) throw RecipeError("region mask is not binary at index " + std::to_string(i));
    if (mask[i]) out[i] = corrupted[i];
  }
  return out;
}

// ---- ladder -----------------------------------------------------------------

void NoiseLadder::validate() const {
  if (levels < 2) throw ConfigError("noise ladder needs at least 2 levels");
  if (!std::isfinite(snr_start_db) || !std::isfinite(snr_end_db)) throw ConfigError("noise ladder ends must be finite");
}

double NoiseLadder::snr_at(std::size_t level) const {
  return snr_start_db + (snr_end_db - snr_start_db) * static_cast<double>(level) / static_cast<double>(levels - 1);
}

std::vector<LadderLevel> ladder(const ImageGrid& image, const NoiseLadder& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<LadderLevel> out;
  out.reserve(spec.levels);
  for (std::size_t i = 0; i < spec.levels; ++i) {
    const double snr = spec.snr_at(i);
    out.push_back(LadderLevel{i, snr, apply_rician(image, snr, derive_seed({seed, 0x4c414444u, i}))});
  }
  return out;
}

// ---- sampler ----------------------------------------------------------------

void CorruptionDistribution::validate() const {
  const double total = rician_weight + motion_weight + bias_weight;
  if (rician_weight < 0 || motion_weight < 0 || bias_weight < 0 || !(total > 0))
    throw ConfigError("corruption weights must be non-negative with a positive sum");
  if (compose_probability < 0 || compose_probability > 1)
    throw ConfigError("corruption compose_probability must lie in [0,1]");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("corruption snr_min_db exceeds snr_max_db");
  if (max_shift_px < 0 || max_rotation_deg < 0 || max_bias_coefficient < 0)
    throw ConfigError("corruption magnitudes must be non-negative");
}

namespace {

Step sample_step(const CorruptionDistribution& d, std::size_t height, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const double total = d.rician_weight + d.motion_weight + d.bias_weight;
  const double pick = u01(rng) * total;
  if (pick < d.rician_weight) return Step{RicianStep{uni(d.snr_min_db, d.snr_max_db)}};
  if (pick < d.rician_weight + d.motion_weight) {
    MotionStep m;
    const int count = std::uniform_int_distribution<int>(1, 3)(rng);
    const std::size_t max_len = std::max<std::size_t>(4, height / 4);
    for (int tries = 0; tries < 32 && static_cast<int>(m.segments.size()) < count; ++tries) {
      const std::size_t len = std::uniform_int_distribution<std::size_t>(std::min<std::size_t>(4, height), max_len)(rng);
      if (len > height) continue;
      const std::size_t begin = std::uniform_int_distribution<std::size_t>(0, height - len)(rng);
      MotionSegment s{begin, begin + len, uni(-d.max_shift_px, d.max_shift_px), uni(-d.max_shift_px, d.max_shift_px),
                      uni(-d.max_rotation_deg, d.max_rotation_deg)};
      bool overlaps = false;
      for (const auto& o : m.segments) overlaps = overlaps || (s.line_begin < o.line_end && o.line_begin < s.line_end);
      if (!overlaps) m.segments.push_back(s);
    }
    return Step{std::move(m)};
  }
  BiasStep b{2, std::vector<double>(bias_coefficient_count(2))};
  for (double& c : b.coefficients) c = uni(-d.max_bias_coefficient, d.max_bias_coefficient);
  return Step{std::move(b)};
}

}  // namespace

Recipe sample_recipe(const CorruptionDistribution& dist, std::size_t height, Rng& rng) {
  Recipe r;
  r.steps.push_back(sample_step(dist, height, rng));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < dist.compose_probability) r.steps.push_back(sample_step(dist, height, rng));
  return r;
}

std::string describe(const Recipe& recipe) {
  std::ostringstream os;
  os.precision(4);
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    if (i) os << '+';
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, RicianStep>) os << "rician(" << s.snr_db << "dB)";
          else if constexpr (std::is_same_v<S, MotionStep>) os << "motion(" << s.segments.size() << ")";
          else if constexpr (std::is_same_v<S, BiasStep>) os << "bias(" << s.order << ")";
          else os << "region(" << s.inner.size() << ")";
        },
        recipe.steps[i].op);
  }
  return recipe.steps.empty() ? "clean" : os.str();
}

}  // namespace uqr::corrupt
