#include "core/qcmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "core/bytes.hpp"
#include "core/config_io.hpp"
#include "core/parallel.hpp"
#include "core/phantom.hpp"
#include "core/rng.hpp"

namespace uqr::qc {

namespace {

std::string fmt(double v) { return config::format_double(v); }

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = static_cast<double>(i + j) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

double mean_of(const ImageGrid& g, const MaskGrid& m, std::uint8_t want) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (m[i] == want) {
      s += g[i];
      ++n;
    }
  if (n == 0) throw ProtocolError("partial noise: empty pixel population");
  return s / static_cast<double>(n);
}

double sum_of(const ImageGrid& g) { return std::accumulate(g.values().begin(), g.values().end(), 0.0); }

}  // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ContractError("quantile of an empty population");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SigmaStats sigma_stats(const ImageGrid& sigma, const MaskGrid* mask) {
  std::vector<double> pop;
  if (mask) {
    require_same_shape(sigma, *mask, "sigma_stats mask");
    for (std::size_t i = 0; i < sigma.size(); ++i)
      if ((*mask)[i]) pop.push_back(sigma[i]);
    if (pop.empty()) throw ContractError("sigma_stats: mask selects no pixels");
  } else {
    pop.assign(sigma.values().begin(), sigma.values().end());
  }
  std::sort(pop.begin(), pop.end());
  SigmaStats s;
  s.count = pop.size();
  s.median = quantile_sorted(pop, 0.5);
  s.q1 = quantile_sorted(pop, 0.25);
  s.q3 = quantile_sorted(pop, 0.75);
  s.total = std::accumulate(pop.begin(), pop.end(), 0.0);
  s.mean = s.total / static_cast<double>(pop.size());
  return s;
}

Fit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("ols needs two equal-length columns of length >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Fit f;
  if (!(sxx > 0) || !(syy > 0)) {
    f.degenerate = true;
    f.r2 = std::numeric_limits<double>::quiet_NaN();
    f.slope = sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
    f.intercept = sxx > 0 ? my - f.slope * mx : std::numeric_limits<double>::quiet_NaN();
    return f;
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = std::clamp((sxy * sxy) / (sxx * syy), 0.0, 1.0);
  return f;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const Fit f = ols(ra, rb);
  if (f.degenerate) return std::numeric_limits<double>::quiet_NaN();
  const double r = std::sqrt(f.r2);
  return f.slope < 0 ? -r : r;
}

double permutation_r2(std::span<const double> x, std::span<const double> y, std::size_t shuffles, std::uint64_t seed) {
  if (shuffles == 0) throw ContractError("permutation_r2 needs at least one shuffle");
  Rng rng = make_rng({seed, 0x5045524d});
  std::vector<double> perm(y.begin(), y.end());
  double acc = 0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const Fit f = ols(x, perm);
    if (f.degenerate) continue;
    acc += f.r2;
    ++counted;
  }
  return counted ? acc / static_cast<double>(counted) : std::numeric_limits<double>::quiet_NaN();
}

LadderResult summarise_ladder(std::vector<LadderRow> rows, std::uint64_t seed, std::size_t shuffles) {
  LadderResult r;
  r.rows = std::move(rows);
  std::vector<double> level, sigma, err;
  for (const auto& row : r.rows) {
    level.push_back(static_cast<double>(row.level));
    sigma.push_back(row.median_sigma);
    err.push_back(row.mse);
  }
  r.fit = ols(sigma, err);
  r.spearman_level_sigma = spearman(level, sigma);
  r.permutation_r2 = r.fit.degenerate ? std::numeric_limits<double>::quiet_NaN()
                                      : permutation_r2(sigma, err, shuffles, seed);
  return r;
}

LadderResult ladder_correlation(const net::Model& model, const ImageGrid& clean, const corrupt::NoiseLadder& spec,
                                std::uint64_t seed, std::size_t shuffles) {
  const auto levels = corrupt::ladder(clean, spec, seed);
  std::vector<LadderRow> rows(levels.size());
  parallel_for(levels.size(), [&](std::size_t i) {
    const net::Prediction p = model.predict(levels[i].image);
    const SigmaStats s = sigma_stats(net::sigma_from_logvar(p.recon_logvar));
    rows[i] = LadderRow{levels[i].level, levels[i].snr_db, s.median, s.q1, s.q3, mse(p.recon_mean, clean)};
  });
  return summarise_ladder(std::move(rows), seed, shuffles);
}

double dice(const MaskGrid& a, const MaskGrid& b) {
  require_same_shape(a, b, "dice");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

MaskGrid segment(const ImageGrid& logit) {
  MaskGrid m(logit.height(), logit.width(), 0);
  for (std::size_t i = 0; i < logit.size(); ++i) m[i] = logit[i] > 0.0 ? 1 : 0;
  return m;
}

ImageReport qc_score(const net::Model& model, const ImageGrid& image, const std::string& image_id) {
  const net::Prediction p = model.predict(image);
  ImageReport r{image_id, sigma_stats(net::sigma_from_logvar(p.recon_logvar)), std::nullopt};
  if (p.has_segmentation) r.sigma_s = sigma_stats(net::sigma_from_logvar(p.seg_logvar));
  return r;
}

PartialNoiseRow partial_noise_protocol(const net::Model& model, const ImageGrid& clean, const LabelGrid& labels,
                                       const MaskGrid& region, const std::vector<corrupt::Step>& inner,
                                       std::uint64_t seed, const PartialNoiseOptions& options) {
  if (!model.spec().has_segmentation()) throw ContractError("partial noise protocol needs a multi-task model");
  require_same_shape(clean, labels, "partial noise labels");
  require_same_shape(clean, region, "partial noise region");
  const MaskGrid ribbon = phantom::ribbon_mask(labels);
  std::size_t region_px = 0, overlap = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region[i] > 1) throw ProtocolError("partial noise region mask is not binary at index " + std::to_string(i));
    region_px += region[i];
    overlap += region[i] && ribbon[i];
  }
  if (region_px == 0 || region_px == region.size())
    throw ProtocolError("partial noise region must cover some but not all pixels");
  const double frac = static_cast<double>(overlap) / static_cast<double>(region_px);
  if (frac > options.max_overlap_fraction)
    throw ProtocolError("partial noise region overlaps the ribbon on " + std::to_string(overlap) + " pixels (" +
                        fmt(frac) + " of the region, limit " + fmt(options.max_overlap_fraction) + ")");

  const ImageGrid corrupted = corrupt::apply_region(clean, region, inner, seed);
  const net::Prediction pc = model.predict(clean);
  const net::Prediction pn = model.predict(corrupted);
  const ImageGrid sr_c = net::sigma_from_logvar(pc.recon_logvar), sr_n = net::sigma_from_logvar(pn.recon_logvar);
  const ImageGrid ss_c = net::sigma_from_logvar(pc.seg_logvar), ss_n = net::sigma_from_logvar(pn.seg_logvar);
  const MaskGrid seg_c = segment(pc.seg_logit), seg_n = segment(pn.seg_logit);

  PartialNoiseRow r;
  r.sigma_r_inside = mean_of(sr_n, region, 1);
  r.sigma_r_outside = mean_of(sr_n, region, 0);
  r.sigma_r_inside_clean = mean_of(sr_c, region, 1);
  r.sigma_r_outside_clean = mean_of(sr_c, region, 0);
  r.sigma_s_ribbon_clean = mean_of(ss_c, ribbon, 1);
  r.sigma_s_ribbon_corrupted = mean_of(ss_n, ribbon, 1);
  r.dice_clean_vs_corrupted = dice(seg_c, seg_n);
  r.dice_clean_vs_truth = dice(seg_c, ribbon);
  r.dice_corrupted_vs_truth = dice(seg_n, ribbon);
  r.total_sigma_r_clean = sum_of(sr_c);
  r.total_sigma_r_corrupted = sum_of(sr_n);
  r.total_sigma_s_clean = sum_of(ss_c);
  r.total_sigma_s_corrupted = sum_of(ss_n);
  return r;
}

BoxSummary box_summary(std::span<const double> values) {
  if (values.empty()) throw ContractError("box summary of an empty group");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxSummary b;
  b.count = v.size();
  b.min = v.front();
  b.max = v.back();
  b.q1 = quantile_sorted(v, 0.25);
  b.median = quantile_sorted(v, 0.5);
  b.q3 = quantile_sorted(v, 0.75);
  const double iqr = b.q3 - b.q1;
  b.whisker_low = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= b.q1 - 1.5 * iqr; });
  b.whisker_high = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= b.q3 + 1.5 * iqr; });
  return b;
}

GroupComparison group_compare(std::span<const ImageReport> a, std::span<const ImageReport> b) {
  if (a.empty() || b.empty()) throw ContractError("group_compare needs two non-empty groups");
  auto totals = [](std::span<const ImageReport> g, bool seg) {
    std::vector<double> out;
    for (const auto& r : g) out.push_back(seg ? r.sigma_s->total : r.sigma_r.total);
    return out;
  };
  auto relative = [](double diff, double ref) { return ref != 0 ? diff / std::abs(ref) : 0.0; };
  GroupComparison c;
  c.a_sigma_r = box_summary(totals(a, false));
  c.b_sigma_r = box_summary(totals(b, false));
  c.median_diff_r = c.b_sigma_r.median - c.a_sigma_r.median;
  c.relative_diff_r = relative(c.median_diff_r, c.a_sigma_r.median);
  c.has_segmentation = std::all_of(a.begin(), a.end(), [](const auto& r) { return r.sigma_s.has_value(); }) &&
                       std::all_of(b.begin(), b.end(), [](const auto& r) { return r.sigma_s.has_value(); });
  if (c.has_segmentation) {
    c.a_sigma_s = box_summary(totals(a, true));
    c.b_sigma_s = box_summary(totals(b, true));
    c.median_diff_s = c.b_sigma_s.median - c.a_sigma_s.median;
    c.relative_diff_s = relative(c.median_diff_s, c.a_sigma_s.median);
  }
  return c;
}

// ---- writers ----

void write_qc_csv(const std::filesystem::path& path, std::span<const ImageReport> reports) {
  const bool seg = !reports.empty() && std::all_of(reports.begin(), reports.end(),
                                                   [](const auto& r) { return r.sigma_s.has_value(); });
  std::ostringstream os;
  os << "image_id,median_sigma,q1,q3,total_sigma";
  if (seg) os << ",median_sigma_s,q1_s,q3_s,total_sigma_s";
  os << '\n';
  for (const auto& r : reports) {
    os << r.image_id << ',' << fmt(r.sigma_r.median) << ',' << fmt(r.sigma_r.q1) << ',' << fmt(r.sigma_r.q3) << ','
       << fmt(r.sigma_r.total);
    if (seg)
      os << ',' << fmt(r.sigma_s->median) << ',' << fmt(r.sigma_s->q1) << ',' << fmt(r.sigma_s->q3) << ','
         << fmt(r.sigma_s->total);
    os << '\n';
  }
  write_text(path, os.str());
}

void write_ladder_csv(const std::filesystem::path& path, const LadderResult& result) {
  std::ostringstream os;
  os << "level,snr_db,median_sigma,mse,q1,q3\n";
  for (const auto& r : result.rows)
    os << r.level << ',' << fmt(r.snr_db) << ',' << fmt(r.median_sigma) << ',' << fmt(r.mse) << ',' << fmt(r.q1)
       << ',' << fmt(r.q3) << '\n';
  write_text(path, os.str());
}

std::string ladder_summary_yaml(const LadderResult& r) {
  YAML::Emitter out;
  auto num = [&](double v) { return std::isnan(v) ? std::string("degenerate") : fmt(v); };
  out << YAML::BeginMap;
  out << YAML::Key << "levels" << YAML::Value << r.rows.size();
  out << YAML::Key << "fit" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "x" << YAML::Value << "median_sigma";
  out << YAML::Key << "y" << YAML::Value << "mse";
  out << YAML::Key << "degenerate" << YAML::Value << r.fit.degenerate;
  out << YAML::Key << "r2" << YAML::Value << num(r.fit.r2);
  out << YAML::Key << "slope" << YAML::Value << num(r.fit.slope);
  out << YAML::Key << "intercept" << YAML::Value << num(r.fit.intercept);
  out << YAML::EndMap;
  out << YAML::Key << "spearman_level_sigma" << YAML::Value << num(r.spearman_level_sigma);
  out << YAML::Key << "permutation_r2" << YAML::Value << num(r.permutation_r2);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void write_partial_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                       std::span<const PartialNoiseRow> rows) {
  if (ids.size() != rows.size()) throw ContractError("write_partial_csv: id and row counts differ");
  std::ostringstream os;
  os << "image_id,sigma_r_inside,sigma_r_outside,sigma_r_inside_clean,sigma_r_outside_clean,"
        "sigma_s_ribbon_clean,sigma_s_ribbon_corrupted,dice_clean_vs_corrupted,dice_clean_vs_truth,"
        "dice_corrupted_vs_truth,total_sigma_r_clean,total_sigma_r_corrupted,total_sigma_s_clean,"
        "total_sigma_s_corrupted\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << ids[i];
    for (double v : {r.sigma_r_inside, r.sigma_r_outside, r.sigma_r_inside_clean, r.sigma_r_outside_clean,
                     r.sigma_s_ribbon_clean, r.sigma_s_ribbon_corrupted, r.dice_clean_vs_corrupted,
                     r.dice_clean_vs_truth, r.dice_corrupted_vs_truth, r.total_sigma_r_clean,
                     r.total_sigma_r_corrupted, r.total_sigma_s_clean, r.total_sigma_s_corrupted})
      os << ',' << fmt(v);
    os << '\n';
  }
  write_text(path, os.str());
}

}  // namespace uqr::qc
