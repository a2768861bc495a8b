#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "core/config_io.hpp"
#include "core/corrupt.hpp"
#include "core/kspace.hpp"
#include "core/phantom.hpp"

namespace {

using namespace uqr;
using namespace uqr::corrupt;
using kspace::ComplexGrid;

ImageGrid random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageGrid g(h, w);
  for (double& v : g.values()) v = u(rng);
  return g;
}

ImageGrid test_phantom(std::uint64_t seed = 1) { return phantom::generate(phantom::PhantomConfig{}, seed).image; }

// Average ranks, ties shared.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// ---- FFT ----

TEST(Fft, ImpulseHasFlatSpectrum) {
  ImageGrid g(16, 16, 0.0);
  g(0, 0) = 1.0;
  const ComplexGrid s = kspace::fft2(g);
  for (const auto& c : s.values()) EXPECT_NEAR(std::abs(c), 1.0 / 16.0, 1e-15);
}

TEST(Fft, RoundTripOnRandomGrids) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageGrid g = random_image(64, 64, seed);
    const ImageGrid back = kspace::real_part(kspace::ifft2(kspace::fft2(g)));
    double err = 0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(back[i] - g[i]));
    EXPECT_LT(err, 1e-9);
  }
}

TEST(Fft, ParsevalUnderUnitaryScaling) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageGrid g = random_image(64, 64, seed + 10);
    const ComplexGrid s = kspace::fft2(g);
    double e_img = 0, e_spec = 0;
    for (double v : g.values()) e_img += v * v;
    for (const auto& c : s.values()) e_spec += std::norm(c);
    EXPECT_LT(std::abs(e_img - e_spec) / e_img, 1e-9);
  }
}

TEST(Fft, NonPowerOfTwoIsUnsupported) {
  EXPECT_THROW(kspace::fft2(ImageGrid(48, 64)), UnsupportedSize);
  EXPECT_THROW(kspace::fft2(ImageGrid(64, 6)), UnsupportedSize);
}

TEST(Fft, CentredLineIndexing) {
  EXPECT_EQ(kspace::raw_row(32, 64), 0u);  // DC
  EXPECT_EQ(kspace::raw_row(0, 64), 32u);  // Nyquist
  EXPECT_EQ(kspace::raw_row(33, 64), 1u);
  EXPECT_EQ(kspace::raw_row(31, 64), 63u);
}

// ---- Rician ----

TEST(Rician, ZeroNoiseLimitReturnsMagnitude) {
  ImageGrid g = random_image(32, 32, 3);
  g(0, 0) = -0.25;
  const ImageGrid out = apply_rician(g, kNoiseFreeSnrDb, 9);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(out[i], std::abs(g[i]));
  EXPECT_EQ(noise_sigma(g, 1e6), 0.0);
}

TEST(Rician, ZeroSignalGivesRayleighMean) {
  const std::size_t n = 1000;  // 10^6 pixels
  const ImageGrid out = apply_rician_sigma(ImageGrid(n, n, 0.0), 1.0, 2024);
  double sum = 0;
  for (double v : out.values()) sum += v;
  const double mean = sum / static_cast<double>(out.size());
  const double rayleigh_sd = std::sqrt((4.0 - std::numbers::pi) / 2.0);
  const double se = rayleigh_sd / std::sqrt(static_cast<double>(out.size()));
  EXPECT_LT(std::abs(mean - std::sqrt(std::numbers::pi / 2.0)), 3.0 * se);
}

TEST(Rician, SigmaFollowsDecibelDefinition) {
  const ImageGrid ones(8, 8, 1.0);
  EXPECT_NEAR(noise_sigma(ones, 10.0), 0.31623, 5e-6);
  EXPECT_NEAR(noise_sigma(ones, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(noise_sigma(ImageGrid(8, 8, 2.0), 20.0), 0.2, 1e-15);
}

TEST(Rician, OutputIsNonNegativeAndSeedDeterministic) {
  const ImageGrid g = test_phantom();
  const ImageGrid a = apply_rician(g, -10.0, 5), b = apply_rician(g, -10.0, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, apply_rician(g, -10.0, 6));
  for (double v : a.values()) EXPECT_GE(v, 0.0);
}

// ---- motion ----

TEST(Motion, NoSegmentsIsIdentity) {
  const ImageGrid g = test_phantom();
  EXPECT_EQ(apply_motion(g, {}), g);
}

TEST(Motion, FullCoverageZeroTransformIsIdentity) {
  const ImageGrid g = test_phantom();
  const ImageGrid out = apply_motion(g, {MotionSegment{0, 64, 0, 0, 0}});
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(out[i], g[i], 1e-9);
}

TEST(Motion, OuterSegmentLeavesCentralLinesUntouched) {
  const ImageGrid g = test_phantom();
  const std::vector<MotionSegment> segs{MotionSegment{0, 8, 3, 0, 0}};
  const ComplexGrid clean = kspace::fft2(g);
  const ComplexGrid moved = motion_spectrum(g, segs);
  for (std::size_t line = 28; line < 36; ++line) {
    const std::size_t row = kspace::raw_row(line, 64);
    for (std::size_t x = 0; x < 64; ++x) ASSERT_EQ(moved(row, x), clean(row, x)) << "line " << line;
  }
  // All lines outside the segment are preserved as well.
  for (std::size_t line = 8; line < 64; ++line) {
    const std::size_t row = kspace::raw_row(line, 64);
    for (std::size_t x = 0; x < 64; ++x) ASSERT_EQ(moved(row, x), clean(row, x));
  }
  EXPECT_GT(mse(apply_motion(g, segs), g), 0.0);
}

TEST(Motion, ShiftMatchesCircularTranslation) {
  const ImageGrid g = test_phantom();
  const ImageGrid out = apply_motion(g, {MotionSegment{0, 64, 3, -2, 0}});
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) EXPECT_NEAR(out((y + 3) % 64, (x + 62) % 64), g(y, x), 1e-9);
}

TEST(Motion, OverlappingSegmentsAreRejected) {
  const ImageGrid g = test_phantom();
  EXPECT_THROW(apply_motion(g, {MotionSegment{0, 10, 1, 0, 0}, MotionSegment{8, 12, 0, 1, 0}}), RecipeError);
  EXPECT_THROW(apply_motion(g, {MotionSegment{60, 70, 1, 0, 0}}), RecipeError);
  EXPECT_THROW(apply_motion(g, {MotionSegment{5, 5, 1, 0, 0}}), RecipeError);
}

TEST(Motion, RotationByZeroIsIdentityAndNinetyPermutes) {
  const ImageGrid g = random_image(8, 8, 4);
  EXPECT_EQ(rotate_bilinear(g, 0.0), g);
  const ImageGrid r = rotate_bilinear(g, 90.0);
  const ImageGrid back = rotate_bilinear(r, -90.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back[i], g[i], 1e-12);
}

// ---- bias ----

TEST(Bias, ZeroCoefficientsAreIdentity) {
  const ImageGrid g = test_phantom();
  EXPECT_EQ(apply_bias(g, 2, std::vector<double>(6, 0.0)), g);
}

TEST(Bias, OrderZeroLogTwoDoubles) {
  const ImageGrid g = test_phantom();
  const ImageGrid out = apply_bias(g, 0, {std::log(2.0)});
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(out[i], 2.0 * g[i], 1e-15);
}

TEST(Bias, LinearInUGivesESquaredRatio) {
  const ImageGrid g(16, 16, 1.0);
  const ImageGrid out = apply_bias(g, 1, {0.0, 1.0, 0.0});
  for (std::size_t y = 0; y < 16; ++y) EXPECT_NEAR(out(y, 15) / out(y, 0), std::exp(2.0), 1e-12);
  EXPECT_NEAR(std::exp(2.0), 7.389, 1e-3);
}

TEST(Bias, CoefficientCountMismatchIsRecipeError) {
  EXPECT_EQ(bias_coefficient_count(0), 1u);
  EXPECT_EQ(bias_coefficient_count(1), 3u);
  EXPECT_EQ(bias_coefficient_count(2), 6u);
  EXPECT_THROW(apply_bias(ImageGrid(4, 4, 1.0), 1, {0.0, 1.0}), RecipeError);
}

// ---- region ----

Recipe rician_region(MaskSpec mask, double snr) {
  RegionStep r;
  r.mask = std::move(mask);
  r.inner = {Step{RicianStep{snr}}};
  return Recipe{{Step{std::move(r)}}};
}

TEST(Region, ZeroMaskIsIdentity) {
  const ImageGrid g = test_phantom();
  EXPECT_EQ(apply_region(g, MaskGrid(64, 64, 0), {Step{RicianStep{0.0}}}, 3), g);
}

TEST(Region, FullMaskEqualsGlobalStepWithSameSeed) {
  const ImageGrid g = test_phantom();
  const std::vector<Step> inner{Step{RicianStep{0.0}}};
  EXPECT_EQ(apply_region(g, MaskGrid(64, 64, 1), inner, 3), apply_steps(g, inner, 3));
}

TEST(Region, BottomQuarterLeavesTopBitIdentical) {
  const ImageGrid g = test_phantom();
  const ImageGrid out = apply_recipe(g, rician_region(MaskSpec::rect(48, 64, 0, 64), 0.0), 17);
  for (std::size_t y = 0; y < 48; ++y)
    for (std::size_t x = 0; x < 64; ++x) ASSERT_EQ(out(y, x), g(y, x));
  EXPECT_GT(mse(out, g), 0.0);
  EXPECT_EQ(bottom_quarter(64, 64), MaskSpec::rect(48, 64, 0, 64).resolve(64, 64));
}

TEST(Region, MotionInsideRegionIsRejected) {
  RegionStep r;
  r.mask = MaskSpec::rect(0, 8, 0, 8);
  r.inner = {Step{MotionStep{{MotionSegment{0, 4, 1, 0, 0}}}}};
  const Recipe recipe{{Step{r}}};
  EXPECT_THROW(validate(recipe), RecipeError);
  EXPECT_THROW(apply_recipe(test_phantom(), recipe, 0), RecipeError);
}

TEST(Region, MaskShapeAndValuesAreChecked) {
  EXPECT_THROW(MaskSpec::rect(0, 80, 0, 8).resolve(64, 64), RecipeError);
  EXPECT_THROW(MaskSpec::from_bitmap(MaskGrid(4, 4, 1)).resolve(64, 64), ShapeError);
  EXPECT_THROW(MaskSpec::from_bitmap(MaskGrid(2, 2, 2)).resolve(2, 2), RecipeError);
}

// ---- recipes ----

TEST(Recipe, EmptyRecipeIsBitExactNoOp) {
  const ImageGrid g = test_phantom();
  EXPECT_EQ(apply_recipe(g, Recipe{}, 99), g);
}

TEST(Recipe, SameSeedIsBitIdentical) {
  const Recipe r{{Step{RicianStep{3.0}}, Step{BiasStep{1, {0.1, 0.2, -0.1}}}, Step{RicianStep{0.0}}}};
  const ImageGrid g = test_phantom();
  EXPECT_EQ(apply_recipe(g, r, 5), apply_recipe(g, r, 5));
  EXPECT_NE(apply_recipe(g, r, 5), apply_recipe(g, r, 6));
}

TEST(Recipe, StepsUseIndexDerivedSeeds) {
  const ImageGrid g = test_phantom();
  const Recipe r{{Step{BiasStep{0, {0.0}}}, Step{RicianStep{0.0}}}};
  EXPECT_EQ(apply_recipe(g, r, 5), apply_rician(g, 0.0, derive_seed({5, 1})));
}

TEST(Recipe, SamplerIsDeterministicAndValid) {
  const CorruptionDistribution d;
  int kinds[3] = {0, 0, 0};
  for (std::uint64_t i = 0; i < 300; ++i) {
    Rng a = make_rng({i}), b = make_rng({i});
    const Recipe ra = sample_recipe(d, 64, a);
    ASSERT_EQ(ra, sample_recipe(d, 64, b));
    ASSERT_NO_THROW(validate(ra));
    ASSERT_GE(ra.steps.size(), 1u);
    kinds[ra.steps[0].op.index()]++;
  }
  EXPECT_GT(kinds[0], kinds[1]);
  EXPECT_GT(kinds[1], kinds[2] / 2);
  EXPECT_GT(kinds[2], 0);
}

TEST(Recipe, DistributionValidation) {
  CorruptionDistribution d;
  d.rician_weight = -1;
  EXPECT_THROW(d.validate(), ConfigError);
  d = {};
  d.snr_min_db = 20;
  EXPECT_THROW(d.validate(), ConfigError);
}

// ---- ladder ----

TEST(Ladder, FortyOneLevelsFromTenToMinusTen) {
  const NoiseLadder spec;
  const auto levels = ladder(test_phantom(), spec, 1);
  ASSERT_EQ(levels.size(), 41u);
  EXPECT_EQ(levels.front().snr_db, 10.0);
  EXPECT_EQ(levels.back().snr_db, -10.0);
  for (std::size_t i = 1; i < levels.size(); ++i) EXPECT_NEAR(levels[i - 1].snr_db - levels[i].snr_db, 0.5, 1e-12);
}

TEST(Ladder, ErrorGrowsMonotonicallyInRank) {
  const ImageGrid g = test_phantom(4);
  const auto levels = ladder(g, NoiseLadder{}, 8);
  std::vector<double> idx, err;
  for (const auto& l : levels) {
    idx.push_back(static_cast<double>(l.level));
    err.push_back(mse(l.image, g));
  }
  EXPECT_GT(pearson(ranks(idx), ranks(err)), 0.99);
}

TEST(Ladder, LevelsDrawIndependentNoise) {
  NoiseLadder flat{0.0, 0.0, 3};
  const auto levels = ladder(test_phantom(), flat, 2);
  EXPECT_NE(levels[0].image, levels[1].image);
  EXPECT_THROW(ladder(test_phantom(), NoiseLadder{0, 0, 1}, 0), ConfigError);
}

// ---- recipe files ----

class RecipeFile : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "uqr_recipe_test";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
  std::filesystem::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

TEST_F(RecipeFile, EmptyFileIsIdentityRecipe) {
  EXPECT_TRUE(config::load_recipe(write("empty.yaml", "")).empty());
}

TEST_F(RecipeFile, RoundTripIsIdempotent) {
  const auto path = write("r.yaml", R"(steps:
  - rician: {snr_db: 0.1}
  - motion:
      segments:
        - {lines: [0, 8], shift: [3, 0], rotation_deg: 1.5}
        - {lines: [40, 44], shift: [-1.25, 2]}
  - bias: {order: 1, coefficients: [0.1, 0.2, 0.30000000000000004]}
  - region:
      mask: {rect: [48, 64, 0, 64]}
      steps:
        - rician: {snr_db: -3}
  - region:
      mask: {bitmap: ["01", "10"]}
      steps: []
)");
  const Recipe first = config::load_recipe(path);
  ASSERT_EQ(first.steps.size(), 5u);
  const std::string text = config::serialise_recipe(first);
  const Recipe second = config::parse_recipe(config::parse_text(text, "mem"));
  EXPECT_EQ(first, second);
  EXPECT_EQ(text, config::serialise_recipe(second));
  EXPECT_EQ(std::get<MotionStep>(first.steps[1].op).segments[1].shift_rows, -1.25);
}

TEST_F(RecipeFile, MaskFileResolvesRelativeToRecipe) {
  LabelGrid m(64, 64, 0);
  m(63, 63) = 1;
  save_labels(dir / "m.lbl", m);
  const Recipe r = config::load_recipe(write("r.yaml", "steps:\n  - region: {mask: {file: m.lbl}, steps: [{rician: {snr_db: 0}}]}\n"));
  const ImageGrid g = test_phantom();
  const ImageGrid out = apply_recipe(g, r, 1);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) ASSERT_EQ(out[i], g[i]);
  EXPECT_NE(out[g.size() - 1], g[g.size() - 1]);
}

TEST_F(RecipeFile, StrictKeysAndLineNumbers) {
  try {
    config::load_recipe(write("a.yaml", "steps:\n  - rician: {snr_db: 1, bogus: 2}\n"));
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  }
  EXPECT_THROW(config::load_recipe(write("b.yaml", "stepz: []\n")), ConfigError);
  EXPECT_THROW(config::load_recipe(write("c.yaml", "steps:\n  - blur: {}\n")), ConfigError);
  EXPECT_THROW(config::load_recipe(write("d.yaml", "steps:\n  - rician: {snr_db: loud}\n")), ConfigError);
  try {
    config::load_recipe(write("e.yaml", "steps: [\n  - rician\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
  EXPECT_THROW(config::load_recipe(dir / "missing.yaml"), ConfigError);
}

TEST_F(RecipeFile, SemanticErrorsAreRecipeErrors) {
  EXPECT_THROW(config::load_recipe(write("a.yaml", "steps:\n  - bias: {order: 1, coefficients: [1]}\n")), RecipeError);
  EXPECT_THROW(config::load_recipe(write("b.yaml",
                                         "steps:\n  - region:\n      mask: {rect: [0, 8, 0, 8]}\n      steps:\n"
                                         "        - motion: {segments: [{lines: [0, 4]}]}\n")),
               RecipeError);
}

}  // namespace
