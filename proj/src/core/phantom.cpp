#include "core/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "core/rng.hpp"

namespace uqr::phantom {

namespace {

// Fractions of the field of view.
constexpr double kCentreRow = 0.40, kCentreCol = 0.50;
constexpr double kMinSemiRows = 0.31, kMaxSemiRows = 0.34;
constexpr double kMinSemiCols = 0.27, kMaxSemiCols = 0.31;
constexpr int kCsfGap = 1;

struct Ellipse {
  double cy, cx, ay, ax, cos_t, sin_t;
  bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double u = (dx * cos_t + dy * sin_t) / ax;
    const double v = (-dx * sin_t + dy * cos_t) / ay;
    return u * u + v * v <= 1.0;
  }
};

// Separable box blur, applied twice, clamped at the borders.
void box_blur(std::vector<double>& f, std::size_t n, int radius) {
  if (radius <= 0) return;
  std::vector<double> tmp(f.size());
  auto pass = [&](bool rows) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        double acc = 0;
        for (int d = -radius; d <= radius; ++d) {
          const long k = std::clamp<long>(static_cast<long>(b) + d, 0, static_cast<long>(n) - 1);
          acc += rows ? f[a * n + static_cast<std::size_t>(k)] : f[static_cast<std::size_t>(k) * n + a];
        }
        (rows ? tmp[a * n + b] : tmp[b * n + a]) = acc / (2 * radius + 1);
      }
    f.swap(tmp);
  };
  for (int rep = 0; rep < 2; ++rep) {
    pass(true);
    pass(false);
  }
}

// Smooth zero-mean field scaled to max |value| = 1.
std::vector<double> texture_field(std::size_t n, int radius, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> f(n * n);
  for (double& v : f) v = normal(rng);
  box_blur(f, n, radius);
  double m = 0;
  for (double v : f) m += v;
  m /= static_cast<double>(f.size());
  double peak = 0;
  for (double& v : f) {
    v -= m;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0)
    for (double& v : f) v /= peak;
  return f;
}

}  // namespace

void PhantomConfig::validate() const {
  if (size < 32) throw ConfigError("phantom size must be at least 32");
  if (ribbon_thickness < 1) throw ConfigError("phantom ribbon_thickness must be at least 1");
  if (skull_thickness < 1) throw ConfigError("phantom skull_thickness must be at least 1");
  if (min_ellipses < 1 || max_ellipses < min_ellipses)
    throw ConfigError("phantom ellipse count range must satisfy 1 <= min <= max");
  if (smoothing_radius < 0) throw ConfigError("phantom smoothing_radius must be non-negative");
  for (int c = 0; c < 4; ++c) {
    if (texture_amplitude[c] < 0) throw ConfigError("phantom texture amplitudes must be non-negative");
    if (class_mean[c] - texture_amplitude[c] < 0 || class_mean[c] + texture_amplitude[c] > 1)
      throw ConfigError("phantom class " + std::to_string(c) + " intensity range leaves [0,1]");
  }
  if (!(class_mean[Core] > class_mean[Ribbon] && class_mean[Ribbon] > class_mean[Background]))
    throw ConfigError("phantom means must satisfy core > ribbon > background");
  // The smallest possible head radius must hold skull, gap, ribbon and a core.
  const double head_radius = kMinSemiCols * static_cast<double>(size) * 0.9;
  if (ribbon_thickness >= head_radius ||
      skull_thickness + kCsfGap + ribbon_thickness + 1 >= head_radius)
    throw ConfigError("phantom geometry is degenerate: skull " + std::to_string(skull_thickness) + " + ribbon " +
                      std::to_string(ribbon_thickness) +
                      " does not fit inside head radius " + std::to_string(head_radius));
}

Phantom generate(const PhantomConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = config.size;
  const double N = static_cast<double>(n);
  Rng rng = make_rng({seed, 0x5048414eu});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const double cy = (kCentreRow + uni(-0.02, 0.02)) * N;
  const double cx = (kCentreCol + uni(-0.03, 0.03)) * N;
  const double ay = uni(kMinSemiRows, kMaxSemiRows) * N;
  const double ax = uni(kMinSemiCols, kMaxSemiCols) * N;
  std::array<double, 3> harm_amp{}, harm_phase{};
  for (int k = 0; k < 3; ++k) {
    harm_amp[k] = uni(0.0, 0.03);
    harm_phase[k] = uni(0.0, 2 * std::numbers::pi);
  }
  const double scale = std::min(ay, ax);

  // Depth inside the head outline in pixels (negative outside).
  std::vector<double> depth(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dy = (static_cast<double>(y) - cy) / ay, dx = (static_cast<double>(x) - cx) / ax;
      const double rho = std::sqrt(dy * dy + dx * dx);
      const double theta = std::atan2(dy, dx);
      double radius = 1.0;
      for (int k = 0; k < 3; ++k) radius += harm_amp[k] * std::cos((k + 2) * theta + harm_phase[k]);
      depth[y * n + x] = (1.0 - rho / radius) * scale;
    }

  const int count = std::uniform_int_distribution<int>(config.min_ellipses, config.max_ellipses)(rng);
  std::vector<Ellipse> ellipses;
  for (int i = 0; i < count; ++i) {
    const double eay = uni(0.30, 0.60) * ay, eax = uni(0.30, 0.60) * ax;
    const double t = uni(0.0, std::numbers::pi);
    // Offsets below half a semi-axis keep the head centre inside every
    // ellipse, so the union is star-shaped and connected.
    ellipses.push_back(Ellipse{cy + uni(-0.45, 0.45) * eay, cx + uni(-0.45, 0.45) * eax, eay, eax, std::cos(t),
                               std::sin(t)});
  }

  const double skull_t = config.skull_thickness;
  const double brain_edge = skull_t + kCsfGap;
  const double core_edge = brain_edge + config.ribbon_thickness + 1;

  LabelGrid labels(n, n, Background);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double d = depth[y * n + x];
      if (d < 0) continue;
      if (d < skull_t) {
        labels(y, x) = Skull;
        continue;
      }
      if (d >= core_edge)
        for (const Ellipse& e : ellipses)
          if (e.contains(static_cast<double>(y), static_cast<double>(x))) {
            labels(y, x) = Core;
            break;
          }
    }

  const int t = config.ribbon_thickness;
  LabelGrid grown = labels;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      if (labels(y, x) != Core) continue;
      for (int dy = -t; dy <= t; ++dy)
        for (int dx = -t; dx <= t; ++dx) {
          if (dy * dy + dx * dx > t * t) continue;
          const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(n) || xx >= static_cast<long>(n)) continue;
          auto& l = grown(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
          if (l == Background && depth[static_cast<std::size_t>(yy) * n + static_cast<std::size_t>(xx)] >= brain_edge)
            l = Ribbon;
        }
    }
  labels = std::move(grown);

  std::array<std::vector<double>, 4> fields;
  for (int c = 0; c < 4; ++c) fields[c] = texture_field(n, config.smoothing_radius, rng);

  ImageGrid image(n, n);
  for (std::size_t i = 0; i < n * n; ++i) {
    const int c = labels[i];
    image[i] = std::clamp(config.class_mean[c] + config.texture_amplitude[c] * fields[c][i], 0.0, 1.0);
  }
  return Phantom{std::move(image), std::move(labels), seed};
}

MaskGrid ribbon_mask(const LabelGrid& labels) {
  MaskGrid m(labels.height(), labels.width(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == Ribbon ? 1 : 0;
  return m;
}

SeedSplit split(std::span<const std::uint64_t> seeds, SplitFractions f) {
  if (seeds.size() < 10) throw ConfigError("split needs at least 10 seeds");
  if (f.train < 0 || f.valid < 0 || f.test < 0 || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  const double n = static_cast<double>(seeds.size());
  const auto n_valid = static_cast<std::size_t>(std::floor(f.valid * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(f.test * n + 1e-9));
  const std::size_t n_train = seeds.size() - n_valid - n_test;
  SeedSplit out;
  out.train.assign(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(seeds.begin() + static_cast<std::ptrdiff_t>(n_train),
                   seeds.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(seeds.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), seeds.end());
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
  return out;
}

}  // namespace uqr::phantom
