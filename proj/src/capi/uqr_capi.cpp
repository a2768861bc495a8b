#include "uqr/uqr.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "core/bytes.hpp"
#include "core/checkpoint.hpp"
#include "core/config_io.hpp"
#include "core/corrupt.hpp"
#include "core/grid.hpp"
#include "core/parallel.hpp"
#include "core/phantom.hpp"
#include "core/qcmetrics.hpp"
#include "core/report.hpp"
#include "core/trainer.hpp"

struct uqr_grid {
  uqr::ImageGrid grid;
};

struct uqr_model {
  uqr::net::Model model;
};

namespace {

namespace fs = std::filesystem;
using namespace uqr;

thread_local std::string g_last_error;

uqr_status status_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return UQR_ERR_USAGE;
    case ErrorCategory::Data: return UQR_ERR_DATA;
    case ErrorCategory::Numeric: return UQR_ERR_NUMERIC;
  }
  return UQR_ERR_INTERNAL;
}

template <typename Fn>
uqr_status guard(Fn&& fn) {
  try {
    fn();
    return UQR_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.category());
  } catch (const YAML::Exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return UQR_ERR_DATA;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return UQR_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return UQR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return UQR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error: unknown exception";
    return UQR_ERR_INTERNAL;
  }
}

template <typename T>
T& need(T* p, const char* what) {
  if (!p) throw ContractError(std::string(what) + " must not be NULL");
  return *p;
}

std::string need_str(const char* s, const char* what) {
  if (!s || !*s) throw ContractError(std::string(what) + " must be a non-empty string");
  return s;
}

std::vector<std::string> need_strings(const char* const* items, std::size_t count, const char* what) {
  if (count == 0) throw ContractError(std::string(what) + ": at least one entry is required");
  if (!items) throw ContractError(std::string(what) + " must not be NULL");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(need_str(items[i], what));
  return out;
}

fs::path prepare_dir(const char* out_dir) {
  const fs::path dir = need_str(out_dir, "out_dir");
  fs::create_directories(dir);
  return dir;
}

// A file may be a bare config or a previous run's manifest.
YAML::Node config_node(const fs::path& path) {
  YAML::Node root = config::load_file(path);
  if (root.IsMap() && root["command"] && root["config"]) return root["config"];
  return root;
}

train::TrainConfig load_train_config(const char* path) {
  if (!path) return train::TrainConfig{};
  return train::parse_config(config_node(need_str(path, "config_path")));
}

std::string fmt(double v) { return config::format_double(v); }

std::string level_name(std::size_t level, std::size_t levels) {
  const int width = std::max<int>(2, static_cast<int>(std::to_string(levels - 1).size()));
  std::ostringstream os;
  os << "ladder_" << std::setw(width) << std::setfill('0') << level << ".img";
  return os.str();
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

class Manifest {
 public:
  explicit Manifest(const char* command) {
    out_ << YAML::BeginMap;
    out_ << YAML::Key << "command" << YAML::Value << command;
    out_ << YAML::Key << "status" << YAML::Value << "ok";
  }
  template <typename V>
  Manifest& field(const char* key, const V& value) {
    out_ << YAML::Key << key << YAML::Value << value;
    return *this;
  }
  Manifest& number(const char* key, double value) { return field(key, fmt(value)); }
  Manifest& list(const char* key, const std::vector<std::string>& values) {
    out_ << YAML::Key << key << YAML::Value << YAML::Flow << values;
    return *this;
  }
  Manifest& node(const char* key, const YAML::Node& n) {
    out_ << YAML::Key << key << YAML::Value << n;
    return *this;
  }
  YAML::Emitter& raw() { return out_; }
  void write(const fs::path& dir, const std::vector<std::string>& outputs) {
    list("outputs", outputs);
    out_ << YAML::EndMap;
    write_text(dir / "manifest.yaml", std::string(out_.c_str()) + "\n");
  }

 private:
  YAML::Emitter out_;
};

YAML::Node recipe_node(const corrupt::Recipe& recipe) { return YAML::Load(config::serialise_recipe(recipe)); }

uqr_grid* wrap(ImageGrid g) { return new uqr_grid{std::move(g)}; }

void write_summary(const fs::path& path, const std::string& text) { write_text(path, text); }

// ---- report ----

bool has_column(const fs::path& csv, const std::string& name) {
  const auto header = report::read_csv(csv).header;
  return std::find(header.begin(), header.end(), name) != header.end();
}

struct ReportWriter {
  fs::path out;
  YAML::Emitter yaml;
  std::vector<std::string> figures;

  void svg(const std::string& name, const std::string& body) {
    write_text(out / name, body);
    figures.push_back(name);
  }

  void ladder(const std::string& tag, const fs::path& csv) {
    const report::Table t = report::read_csv(csv);
    const auto sigma = t.numbers("median_sigma");
    const auto err = t.numbers("mse");
    const qc::Fit fit = qc::ols(sigma, err);
    svg(tag + "_ladder.svg",
        report::scatter_svg(tag + ": median sigma vs MSE", "median sigma_r", "MSE", {"levels", sigma, err}, &fit));
    yaml << YAML::Key << "ladder" << YAML::Value << YAML::BeginMap;
    yaml << YAML::Key << "levels" << YAML::Value << t.rows.size();
    yaml << YAML::Key << "r2" << YAML::Value << (fit.degenerate ? std::string("degenerate") : fmt(fit.r2));
    yaml << YAML::EndMap;
  }

  void partial(const std::string& tag, const fs::path& csv) {
    const report::Table t = report::read_csv(csv);
    const auto rc = t.numbers("total_sigma_r_clean"), rp = t.numbers("total_sigma_r_corrupted");
    const auto sc = t.numbers("total_sigma_s_clean"), sp = t.numbers("total_sigma_s_corrupted");
    svg(tag + "_partial_sigma_r.svg",
        report::box_svg(tag + ": total sigma_r", "total sigma_r",
                        {{"clean", qc::box_summary(rc)}, {"partial noise", qc::box_summary(rp)}}));
    svg(tag + "_partial_sigma_s.svg",
        report::box_svg(tag + ": total sigma_s", "total sigma_s",
                        {{"clean", qc::box_summary(sc)}, {"partial noise", qc::box_summary(sp)}}));
    yaml << YAML::Key << "partial" << YAML::Value << YAML::BeginMap;
    yaml << YAML::Key << "images" << YAML::Value << t.rows.size();
    yaml << YAML::Key << "median_total_sigma_r_clean" << YAML::Value << fmt(qc::box_summary(rc).median);
    yaml << YAML::Key << "median_total_sigma_r_corrupted" << YAML::Value << fmt(qc::box_summary(rp).median);
    yaml << YAML::Key << "median_total_sigma_s_clean" << YAML::Value << fmt(qc::box_summary(sc).median);
    yaml << YAML::Key << "median_total_sigma_s_corrupted" << YAML::Value << fmt(qc::box_summary(sp).median);
    yaml << YAML::EndMap;
  }

  void losses(const std::string& tag, const fs::path& dir) {
    std::vector<report::Series> series;
    for (const char* file : {"losses.csv", "validation.csv"}) {
      if (!fs::exists(dir / file)) continue;
      const report::Table t = report::read_csv(dir / file);
      if (t.rows.empty()) continue;
      const auto it = t.numbers("iter"), total = t.numbers("l_total");
      // Long logs are averaged in windows to keep the plot readable.
      const std::size_t window = std::max<std::size_t>(1, it.size() / 500);
      report::Series s{std::string(file) == "losses.csv" ? "training" : "validation", {}, {}};
      for (std::size_t i = 0; i < it.size(); i += window) {
        const std::size_t end = std::min(it.size(), i + window);
        double sum = 0;
        for (std::size_t k = i; k < end; ++k) sum += total[k];
        s.x.push_back(it[end - 1]);
        s.y.push_back(sum / static_cast<double>(end - i));
      }
      series.push_back(std::move(s));
    }
    if (series.empty()) return;
    svg(tag + "_losses.svg", report::lines_svg(tag + ": total loss", "iteration", "loss", series));
  }

  void qc_files(const std::string& tag, const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("qc", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
    }
    if (files.empty()) return;
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, qc::BoxSummary>> boxes;
    for (const auto& f : files) {
      const report::Table t = report::read_csv(f);
      if (t.rows.empty()) continue;
      boxes.emplace_back(f.stem().string(), qc::box_summary(t.numbers("total_sigma")));
    }
    if (boxes.empty()) return;
    svg(tag + "_qc.svg", report::box_svg(tag + ": total sigma_r per image", "total sigma_r", boxes));
  }
};

}  // namespace

extern "C" {

const char* uqr_version(void) { return "1.0.0"; }

const char* uqr_last_error(void) { return g_last_error.c_str(); }

const char* uqr_default_config(void) {
  static const std::string text = train::serialise_config(train::TrainConfig{});
  return text.c_str();
}

uqr_status uqr_grid_create(size_t height, size_t width, const double* values, uqr_grid** out) {
  return guard([&] {
    need(out, "out") = nullptr;
    if (height == 0 || width == 0) throw ContractError("grid dimensions must be positive");
    need(values, "values");
    *out = wrap(ImageGrid(height, width, std::vector<double>(values, values + height * width)));
  });
}

uqr_status uqr_grid_load(const char* path, uqr_grid** out) {
  return guard([&] {
    need(out, "out") = nullptr;
    *out = wrap(load_image(need_str(path, "path")));
  });
}

uqr_status uqr_grid_save(const uqr_grid* grid, const char* path) {
  return guard([&] { save_image(need_str(path, "path"), need(grid, "grid").grid); });
}

uqr_status uqr_grid_shape(const uqr_grid* grid, size_t* height, size_t* width) {
  return guard([&] {
    const ImageGrid& g = need(grid, "grid").grid;
    need(height, "height") = g.height();
    need(width, "width") = g.width();
  });
}

uqr_status uqr_grid_values(const uqr_grid* grid, double* out, size_t capacity) {
  return guard([&] {
    const ImageGrid& g = need(grid, "grid").grid;
    need(out, "out");
    if (capacity < g.size())
      throw ContractError("capacity " + std::to_string(capacity) + " is below grid size " + std::to_string(g.size()));
    std::copy(g.values().begin(), g.values().end(), out);
  });
}

void uqr_grid_free(uqr_grid* grid) { delete grid; }

uqr_status uqr_simulate(size_t count, uint64_t first_seed, const char* config_path, const char* out_dir) {
  return guard([&] {
    if (count == 0) throw ContractError("phantom count must be at least 1");
    const train::TrainConfig config = load_train_config(config_path);
    config.phantom.validate();
    const fs::path dir = prepare_dir(out_dir);
    const auto seeds = phantom::seed_range(first_seed, count);
    std::vector<phantom::Phantom> phantoms(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) { phantoms[i] = phantom::generate(config.phantom, seeds[i]); });
    std::vector<std::string> outputs;
    for (const auto& p : phantoms) {
      const std::string base = "phantom_" + std::to_string(p.seed);
      save_image(dir / (base + ".img"), p.image);
      save_labels(dir / (base + ".lbl"), p.labels);
      outputs.push_back(base + ".img");
      outputs.push_back(base + ".lbl");
    }
    Manifest m("simulate");
    m.field("phantoms", count).field("first_seed", first_seed);
    m.raw() << YAML::Key << "config" << YAML::Value;
    train::emit_config(m.raw(), config);
    m.write(dir, outputs);
  });
}

uqr_status uqr_corrupt_grid(const uqr_grid* image, const char* recipe_path, uint64_t seed, uqr_grid** out) {
  return guard([&] {
    need(out, "out") = nullptr;
    const corrupt::Recipe recipe = config::load_recipe(need_str(recipe_path, "recipe_path"));
    *out = wrap(corrupt::apply_recipe(need(image, "image").grid, recipe, seed));
  });
}

uqr_status uqr_corrupt(const char* image_path, const char* recipe_path, uint64_t seed, const char* out_dir) {
  return guard([&] {
    const std::string image_file = need_str(image_path, "image_path");
    const ImageGrid image = load_image(image_file);
    const corrupt::Recipe recipe = config::load_recipe(need_str(recipe_path, "recipe_path"));
    const ImageGrid result = corrupt::apply_recipe(image, recipe, seed);
    const fs::path dir = prepare_dir(out_dir);
    save_image(dir / "corrupted.img", result);
    Manifest m("corrupt");
    m.field("image", image_file).field("seed", seed).node("recipe", recipe_node(recipe));
    m.write(dir, {"corrupted.img"});
  });
}

uqr_status uqr_corrupt_ladder(const char* image_path, double snr_start_db, double snr_end_db, size_t levels,
                              uint64_t seed, const char* out_dir) {
  return guard([&] {
    const std::string image_file = need_str(image_path, "image_path");
    const corrupt::NoiseLadder spec{snr_start_db, snr_end_db, levels};
    spec.validate();
    const ImageGrid image = load_image(image_file);
    const auto rungs = corrupt::ladder(image, spec, seed);
    const fs::path dir = prepare_dir(out_dir);
    std::ostringstream csv;
    csv << "level,snr_db,file\n";
    std::vector<std::string> outputs;
    for (const auto& r : rungs) {
      const std::string name = level_name(r.level, levels);
      save_image(dir / name, r.image);
      csv << r.level << ',' << fmt(r.snr_db) << ',' << name << '\n';
      outputs.push_back(name);
    }
    write_text(dir / "ladder.csv", csv.str());
    outputs.push_back("ladder.csv");
    Manifest m("corrupt");
    m.field("image", image_file).field("seed", seed);
    m.raw() << YAML::Key << "ladder" << YAML::Value << YAML::BeginMap << YAML::Key << "snr_start_db" << YAML::Value
            << fmt(snr_start_db) << YAML::Key << "snr_end_db" << YAML::Value << fmt(snr_end_db) << YAML::Key
            << "levels" << YAML::Value << levels << YAML::EndMap;
    m.write(dir, outputs);
  });
}

uqr_status uqr_train(const char* task, const char* config_path, int has_seed, uint64_t seed, int has_iterations,
                     size_t iterations, int verbose, const char* out_dir) {
  return guard([&] {
    train::TrainConfig config = load_train_config(config_path);
    if (task) config.task = net::parse_task(task);
    if (has_seed) config.seed = seed;
    if (has_iterations) config.iterations = iterations;
    config.validate();
    const fs::path dir = need_str(out_dir, "out_dir");
    const std::size_t every = std::max<std::size_t>(1, config.iterations / 20);
    train::Progress progress;
    if (verbose) {
      progress = [every, total = config.iterations](const train::LossRow& r) {
        if (r.iter % every == 0 || r.iter == total)
          std::fprintf(stderr, "iter %zu/%zu l_reg %.6g l_seg %.6g l_total %.6g\n", r.iter, total, r.l_reg, r.l_seg,
                       r.l_total);
      };
    }
    train::train(config, dir, progress);
  });
}

uqr_status uqr_model_load(const char* path, uqr_model** out) {
  return guard([&] {
    need(out, "out") = nullptr;
    *out = new uqr_model{checkpoint::load(need_str(path, "path"))};
  });
}

void uqr_model_free(uqr_model* model) { delete model; }

int uqr_model_has_segmentation(const uqr_model* model) {
  return model && model->model.spec().has_segmentation() ? 1 : 0;
}

uqr_status uqr_model_predict(const uqr_model* model, const uqr_grid* image, uqr_grid** recon_mean,
                             uqr_grid** sigma_r, uqr_grid** seg_logit, uqr_grid** sigma_s) {
  for (uqr_grid** p : {recon_mean, sigma_r, seg_logit, sigma_s})
    if (p) *p = nullptr;
  return guard([&] {
    net::Prediction pred = need(model, "model").model.predict(need(image, "image").grid);
    // Allocate everything before handing ownership out.
    std::vector<std::pair<uqr_grid**, ImageGrid>> outputs;
    if (recon_mean) outputs.emplace_back(recon_mean, std::move(pred.recon_mean));
    if (sigma_r) outputs.emplace_back(sigma_r, net::sigma_from_logvar(pred.recon_logvar));
    if (pred.has_segmentation) {
      if (seg_logit) outputs.emplace_back(seg_logit, std::move(pred.seg_logit));
      if (sigma_s) outputs.emplace_back(sigma_s, net::sigma_from_logvar(pred.seg_logvar));
    }
    std::vector<std::unique_ptr<uqr_grid>> made;
    for (auto& o : outputs) made.emplace_back(wrap(std::move(o.second)));
    for (std::size_t i = 0; i < outputs.size(); ++i) *outputs[i].first = made[i].release();
  });
}

uqr_status uqr_evaluate_ladder(const char* model_path, const char* image_path, uint64_t seed, double snr_start_db,
                               double snr_end_db, size_t levels, const char* out_dir) {
  return guard([&] {
    const std::string model_file = need_str(model_path, "model_path");
    const std::string image_file = need_str(image_path, "image_path");
    const corrupt::NoiseLadder spec{snr_start_db, snr_end_db, levels};
    spec.validate();
    const net::Model model = checkpoint::load(model_file);
    const ImageGrid image = load_image(image_file);
    const qc::LadderResult result = qc::ladder_correlation(model, image, spec, seed);
    const fs::path dir = prepare_dir(out_dir);
    qc::write_ladder_csv(dir / "ladder.csv", result);
    write_summary(dir / "summary.yaml", qc::ladder_summary_yaml(result));
    Manifest m("evaluate");
    m.field("protocol", "ladder").field("model", model_file).field("image", image_file).field("seed", seed);
    m.raw() << YAML::Key << "ladder" << YAML::Value << YAML::BeginMap << YAML::Key << "snr_start_db" << YAML::Value
            << fmt(snr_start_db) << YAML::Key << "snr_end_db" << YAML::Value << fmt(snr_end_db) << YAML::Key
            << "levels" << YAML::Value << levels << YAML::EndMap;
    m.write(dir, {"ladder.csv", "summary.yaml"});
  });
}

uqr_status uqr_evaluate_partial(const char* model_path, const char* const* image_paths,
                                const char* const* label_paths, size_t count, const char* recipe_path,
                                const char* mask_path, double max_overlap, uint64_t seed, const char* out_dir) {
  return guard([&] {
    const std::string model_file = need_str(model_path, "model_path");
    const auto images = need_strings(image_paths, count, "image_paths");
    const auto labels = need_strings(label_paths, count, "label_paths");
    if (!(max_overlap >= 0 && max_overlap <= 1)) throw ContractError("max_overlap must lie in [0, 1]");
    const net::Model model = checkpoint::load(model_file);
    if (!model.spec().has_segmentation())
      throw ContractError("the partial-noise protocol needs a multitask model; " + model_file +
                          " has no segmentation head");

    std::vector<corrupt::Step> inner{corrupt::Step{corrupt::RicianStep{0.0}}};
    if (recipe_path) inner = config::load_recipe(need_str(recipe_path, "recipe_path")).steps;
    if (inner.empty()) throw RecipeError("partial-noise recipe has no steps");
    const std::string mask_file = mask_path ? need_str(mask_path, "mask_path") : std::string();

    std::vector<ImageGrid> clean(count);
    std::vector<LabelGrid> truth(count);
    std::vector<MaskGrid> regions(count);
    for (std::size_t i = 0; i < count; ++i) {
      clean[i] = load_image(images[i]);
      truth[i] = load_labels(labels[i]);
      require_same_shape(clean[i], truth[i], images[i] + " and " + labels[i]);
      regions[i] = mask_file.empty() ? corrupt::bottom_quarter(clean[i].height(), clean[i].width())
                                     : corrupt::MaskSpec::from_file(mask_file).resolve(clean[i].height(),
                                                                                       clean[i].width());
    }

    std::vector<qc::PartialNoiseRow> rows(count);
    std::vector<qc::ImageReport> clean_reports(count), corrupted_reports(count);
    std::vector<std::string> ids(count);
    const qc::PartialNoiseOptions options{max_overlap};
    parallel_for(count, [&](std::size_t i) {
      const std::uint64_t s = derive_seed({seed, i});
      ids[i] = stem_of(images[i]);
      rows[i] = qc::partial_noise_protocol(model, clean[i], truth[i], regions[i], inner, s, options);
      clean_reports[i] = qc::qc_score(model, clean[i], ids[i]);
      corrupted_reports[i] = qc::qc_score(model, corrupt::apply_region(clean[i], regions[i], inner, s), ids[i]);
    });

    const fs::path dir = prepare_dir(out_dir);
    qc::write_partial_csv(dir / "partial.csv", ids, rows);
    qc::write_qc_csv(dir / "qc_clean.csv", clean_reports);
    qc::write_qc_csv(dir / "qc_partial.csv", corrupted_reports);

    const qc::GroupComparison cmp = qc::group_compare(clean_reports, corrupted_reports);
    double inside = 0, outside = 0, dice_cc = 0;
    for (const auto& r : rows) {
      inside += r.sigma_r_inside;
      outside += r.sigma_r_outside;
      dice_cc += r.dice_clean_vs_corrupted;
    }
    const double n = static_cast<double>(count);
    auto box = [&](YAML::Emitter& y, const char* key, const qc::BoxSummary& b) {
      y << YAML::Key << key << YAML::Value << YAML::BeginMap;
      for (auto [k, v] : {std::pair{"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max},
                          {"whisker_low", b.whisker_low}, {"whisker_high", b.whisker_high}})
        y << YAML::Key << k << YAML::Value << fmt(v);
      y << YAML::EndMap;
    };
    YAML::Emitter y;
    y << YAML::BeginMap;
    y << YAML::Key << "images" << YAML::Value << count;
    y << YAML::Key << "mean_sigma_r_inside" << YAML::Value << fmt(inside / n);
    y << YAML::Key << "mean_sigma_r_outside" << YAML::Value << fmt(outside / n);
    y << YAML::Key << "mean_dice_clean_vs_corrupted" << YAML::Value << fmt(dice_cc / n);
    y << YAML::Key << "total_sigma_r" << YAML::Value << YAML::BeginMap;
    box(y, "clean", cmp.a_sigma_r);
    box(y, "partial_noise", cmp.b_sigma_r);
    y << YAML::Key << "median_diff" << YAML::Value << fmt(cmp.median_diff_r);
    y << YAML::Key << "relative_diff" << YAML::Value << fmt(cmp.relative_diff_r);
    y << YAML::EndMap;
    y << YAML::Key << "total_sigma_s" << YAML::Value << YAML::BeginMap;
    box(y, "clean", cmp.a_sigma_s);
    box(y, "partial_noise", cmp.b_sigma_s);
    y << YAML::Key << "median_diff" << YAML::Value << fmt(cmp.median_diff_s);
    y << YAML::Key << "relative_diff" << YAML::Value << fmt(cmp.relative_diff_s);
    y << YAML::EndMap;
    y << YAML::EndMap;
    write_summary(dir / "summary.yaml", std::string(y.c_str()) + "\n");

    Manifest m("evaluate");
    m.field("protocol", "partial").field("model", model_file).list("images", images).list("labels", labels);
    m.field("seed", seed).number("max_overlap", max_overlap);
    m.field("mask", mask_file.empty() ? std::string("bottom_quarter") : mask_file);
    m.node("recipe", recipe_node(corrupt::Recipe{inner}));
    m.write(dir, {"partial.csv", "qc_clean.csv", "qc_partial.csv", "summary.yaml"});
  });
}

uqr_status uqr_qc_score(const char* model_path, const char* const* image_paths, size_t count, const char* out_dir) {
  return guard([&] {
    const std::string model_file = need_str(model_path, "model_path");
    const auto images = need_strings(image_paths, count, "image_paths");
    const net::Model model = checkpoint::load(model_file);
    std::vector<ImageGrid> grids;
    for (const auto& f : images) grids.push_back(load_image(f));
    std::vector<qc::ImageReport> reports(count);
    parallel_for(count, [&](std::size_t i) { reports[i] = qc::qc_score(model, grids[i], stem_of(images[i])); });
    const fs::path dir = prepare_dir(out_dir);
    qc::write_qc_csv(dir / "qc.csv", reports);
    Manifest m("qc-score");
    m.field("model", model_file).list("images", images);
    m.write(dir, {"qc.csv"});
  });
}

uqr_status uqr_report(const char* const* input_dirs, size_t count, const char* out_dir) {
  return guard([&] {
    const auto inputs = need_strings(input_dirs, count, "input_dirs");
    for (const auto& d : inputs)
      if (!fs::is_directory(d)) throw Error(ErrorCategory::Data, "input " + d + " is not a directory");
    const fs::path dir = prepare_dir(out_dir);
    ReportWriter w{dir, {}, {}};
    w.yaml << YAML::BeginMap << YAML::Key << "inputs" << YAML::Value << YAML::BeginSeq;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const fs::path in = inputs[k];
      fs::path norm = fs::absolute(in).lexically_normal();
      if (norm.filename().empty()) norm = norm.parent_path();
      const std::string label = std::to_string(k) + "_" + norm.filename().string();
      w.yaml << YAML::BeginMap << YAML::Key << "path" << YAML::Value << inputs[k];
      if (fs::exists(in / "ladder.csv") && has_column(in / "ladder.csv", "median_sigma")) w.ladder(label, in / "ladder.csv");
      if (fs::exists(in / "partial.csv")) w.partial(label, in / "partial.csv");
      w.losses(label, in);
      w.qc_files(label, in);
      w.yaml << YAML::EndMap;
    }
    w.yaml << YAML::EndSeq;
    w.yaml << YAML::Key << "figures" << YAML::Value << YAML::Flow << w.figures;
    w.yaml << YAML::EndMap;
    write_text(dir / "report.yaml", std::string(w.yaml.c_str()) + "\n");
    Manifest m("report");
    m.list("inputs", inputs);
    auto outputs = w.figures;
    outputs.push_back("report.yaml");
    m.write(dir, outputs);
  });
}

}  // extern "C"
