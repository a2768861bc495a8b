#pragma once

// Uncertainty statistics and the evaluation protocols built on them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/corrupt.hpp"
#include "core/grid.hpp"
#include "core/heteronet.hpp"

namespace uqr::qc {

// Linear interpolation between closest ranks: position p * (n - 1).
double quantile_sorted(std::span<const double> sorted, double p);

struct SigmaStats {
  double median = 0, q1 = 0, q3 = 0;
  double total = 0;  // sum over the population
  double mean = 0;
  std::size_t count = 0;
};

// Statistics of a sigma map, restricted to mask == 1 when a mask is given.
SigmaStats sigma_stats(const ImageGrid& sigma, const MaskGrid* mask = nullptr);

struct Fit {
  double slope = 0, intercept = 0;
  double r2 = 0;            // meaningless when degenerate
  bool degenerate = false;  // either column has zero variance
};

// Ordinary least squares of y on x; R^2 is the squared Pearson correlation.
Fit ols(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks; NaN when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

// Mean R^2 over random re-pairings of y against x.
double permutation_r2(std::span<const double> x, std::span<const double> y, std::size_t shuffles, std::uint64_t seed);

struct LadderRow {
  std::size_t level;
  double snr_db;
  double median_sigma, q1, q3;
  double mse;
};

struct LadderResult {
  std::vector<LadderRow> rows;
  Fit fit;                   // x = median sigma, y = MSE
  double spearman_level_sigma = 0;
  double permutation_r2 = 0;
};

inline constexpr std::size_t kDefaultShuffles = 1000;

LadderResult summarise_ladder(std::vector<LadderRow> rows, std::uint64_t seed,
                              std::size_t shuffles = kDefaultShuffles);

// Corrupts `clean` along the ladder, runs the model on every level and
// relates median sigma_r to MSE(f_r, clean).
LadderResult ladder_correlation(const net::Model& model, const ImageGrid& clean, const corrupt::NoiseLadder& ladder,
                                std::uint64_t seed, std::size_t shuffles = kDefaultShuffles);

// 2|A n B| / (|A| + |B|); two empty masks give 1.
double dice(const MaskGrid& a, const MaskGrid& b);

// Binary segmentation from logits (logit > 0).
MaskGrid segment(const ImageGrid& logit);

struct ImageReport {
  std::string image_id;
  SigmaStats sigma_r;
  std::optional<SigmaStats> sigma_s;
};

ImageReport qc_score(const net::Model& model, const ImageGrid& image, const std::string& image_id);

struct PartialNoiseOptions {
  // Largest tolerated share of region pixels that are ribbon.
  double max_overlap_fraction = 0.0;
};

struct PartialNoiseRow {
  double sigma_r_inside = 0, sigma_r_outside = 0;              // corrupted input, mean sigma_r
  double sigma_r_inside_clean = 0, sigma_r_outside_clean = 0;  // clean input
  double sigma_s_ribbon_clean = 0, sigma_s_ribbon_corrupted = 0;
  double dice_clean_vs_corrupted = 0;
  double dice_clean_vs_truth = 0;
  double dice_corrupted_vs_truth = 0;
  double total_sigma_r_clean = 0, total_sigma_r_corrupted = 0;
  double total_sigma_s_clean = 0, total_sigma_s_corrupted = 0;
};

// Applies `inner` inside `region` only and compares model outputs on the
// clean and corrupted inputs. Requires a multi-task model.
PartialNoiseRow partial_noise_protocol(const net::Model& model, const ImageGrid& clean, const LabelGrid& labels,
                                       const MaskGrid& region, const std::vector<corrupt::Step>& inner,
                                       std::uint64_t seed, const PartialNoiseOptions& options = {});

struct BoxSummary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_low = 0, whisker_high = 0;  // most extreme values within 1.5 IQR
  std::size_t count = 0;
};

BoxSummary box_summary(std::span<const double> values);

struct GroupComparison {
  BoxSummary a_sigma_r, b_sigma_r, a_sigma_s, b_sigma_s;
  double median_diff_r = 0, median_diff_s = 0;  // b - a
  double relative_diff_r = 0, relative_diff_s = 0;
  bool has_segmentation = false;
};

// Group a is the reference (clean), group b the comparison (corrupted).
GroupComparison group_compare(std::span<const ImageReport> a, std::span<const ImageReport> b);

// ---- writers ----

void write_qc_csv(const std::filesystem::path& path, std::span<const ImageReport> reports);
void write_ladder_csv(const std::filesystem::path& path, const LadderResult& result);
std::string ladder_summary_yaml(const LadderResult& result);
void write_partial_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                       std::span<const PartialNoiseRow> rows);

}  // namespace uqr::qc
