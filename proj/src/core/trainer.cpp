#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/bytes.hpp"
#include "core/checkpoint.hpp"
#include "core/config_io.hpp"

namespace uqr::train {

namespace {

constexpr std::uint64_t kIterStream = 0x49544552;   // phantom and recipe draws per iteration
constexpr std::uint64_t kCorruptStream = 0x434f5252;
constexpr std::uint64_t kValidStream = 0x56414c44;
constexpr std::uint64_t kInitStream = 0x494e4954;
constexpr std::uint64_t kCalibStream = 0x43414c42;
constexpr std::size_t kCalibrationExamples = 32;

template <typename T>
void read(const YAML::Node& map, const char* key, T& field, const std::string& ctx) {
  field = config::get_or<T>(map, key, field, ctx);
}

void parse_phantom(const YAML::Node& n, phantom::PhantomConfig& p) {
  const std::string ctx = "phantom";
  config::check_keys(n, {"size", "min_ellipses", "max_ellipses", "ribbon_thickness", "skull_thickness", "class_mean",
                         "texture_amplitude", "smoothing_radius"},
                     ctx);
  read(n, "size", p.size, ctx);
  read(n, "min_ellipses", p.min_ellipses, ctx);
  read(n, "max_ellipses", p.max_ellipses, ctx);
  read(n, "ribbon_thickness", p.ribbon_thickness, ctx);
  read(n, "skull_thickness", p.skull_thickness, ctx);
  read(n, "smoothing_radius", p.smoothing_radius, ctx);
  for (const char* key : {"class_mean", "texture_amplitude"}) {
    if (!n[key]) continue;
    auto v = config::get_or<std::vector<double>>(n, key, {}, ctx);
    if (v.size() != 4)
      throw ConfigError(ctx + "." + key + ": expected 4 values (background, core, ribbon, skull)" +
                        config::where(n[key]));
    auto& dst = std::string(key) == "class_mean" ? p.class_mean : p.texture_amplitude;
    std::copy(v.begin(), v.end(), dst.begin());
  }
}

void parse_corruption(const YAML::Node& n, corrupt::CorruptionDistribution& d) {
  const std::string ctx = "corruption";
  config::check_keys(n, {"rician_weight", "motion_weight", "bias_weight", "compose_probability", "snr_min_db",
                         "snr_max_db", "max_shift_px", "max_rotation_deg", "max_bias_coefficient"},
                     ctx);
  read(n, "rician_weight", d.rician_weight, ctx);
  read(n, "motion_weight", d.motion_weight, ctx);
  read(n, "bias_weight", d.bias_weight, ctx);
  read(n, "compose_probability", d.compose_probability, ctx);
  read(n, "snr_min_db", d.snr_min_db, ctx);
  read(n, "snr_max_db", d.snr_max_db, ctx);
  read(n, "max_shift_px", d.max_shift_px, ctx);
  read(n, "max_rotation_deg", d.max_rotation_deg, ctx);
  read(n, "max_bias_coefficient", d.max_bias_coefficient, ctx);
}

ImageGrid mask_to_image(const MaskGrid& m) {
  ImageGrid out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i];
  return out;
}

std::string fmt(double v) { return config::format_double(v); }

struct StepResult {
  LossRow row;
  std::vector<ad::Tensor<float>> grads;
};

// One forward/backward pass in float; throws NumericError on a non-finite loss.
StepResult gradient_step(const net::Model& model, const Example& ex, std::size_t iter) {
  ad::Graph<float> g;
  std::vector<ad::Var<float>> vars;
  vars.reserve(model.params().size());
  for (const auto& p : model.params()) vars.push_back(g.leaf(p.tensor, true));
  const auto pred = net::forward(g, model.spec(), vars, g.constant(net::image_to_tensor<float>(ex.input)));
  const auto lb = net::task_loss(g, pred, g.constant(net::image_to_tensor<float>(ex.clean)),
                                 g.constant(net::image_to_tensor<float>(mask_to_image(ex.ribbon))));
  g.backward(lb.l_total);
  StepResult out{{iter, g.value(lb.l_reg).item(), g.value(lb.l_seg).item(), g.value(lb.l_total).item()}, {}};
  out.grads.reserve(vars.size());
  for (auto& v : vars) out.grads.push_back(g.grad(v));
  return out;
}

void write_audit_csv(const std::filesystem::path& path, const std::vector<AuditRow>& rows) {
  std::ostringstream os;
  os << "iter,phantom_seed,corruption_seed,recipe\n";
  for (const auto& r : rows) os << r.iter << ',' << r.phantom_seed << ',' << r.corruption_seed << ',' << r.recipe << '\n';
  write_text(path, os.str());
}

void emit_seeds(YAML::Emitter& out, const char* key, const std::vector<std::uint64_t>& seeds) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << seeds;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a positive finite number");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("train.adam.beta1 must lie in [0,1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("train.adam.beta2 must lie in [0,1)");
  if (!(epsilon > 0)) throw ConfigError("train.adam.epsilon must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (phantoms < 10) throw ConfigError("train.phantoms must be at least 10");
  phantom.validate();
  corruption.validate();
  network().validate();
}

net::NetworkSpec TrainConfig::network() const {
  net::NetworkSpec spec;
  spec.depth = depth;
  spec.base_channels = base_channels;
  spec.height = spec.width = phantom.size;
  spec.task = task;
  return spec;
}

TrainConfig parse_config(const YAML::Node& root) {
  TrainConfig c;
  if (!root || root.IsNull()) return c;
  const std::string ctx = "train";
  config::check_keys(root, {"task", "lr", "batch_size", "iterations", "seed", "phantoms", "phantom_seed_start",
                            "checkpoint_every", "validation_every", "validation_probe", "adam", "network", "phantom",
                            "corruption"},
                     ctx);
  if (root["task"]) c.task = net::parse_task(config::get_or<std::string>(root, "task", "", ctx));
  read(root, "lr", c.lr, ctx);
  read(root, "batch_size", c.batch_size, ctx);
  read(root, "iterations", c.iterations, ctx);
  read(root, "seed", c.seed, ctx);
  read(root, "phantoms", c.phantoms, ctx);
  read(root, "phantom_seed_start", c.phantom_seed_start, ctx);
  read(root, "checkpoint_every", c.checkpoint_every, ctx);
  read(root, "validation_every", c.validation_every, ctx);
  read(root, "validation_probe", c.validation_probe, ctx);
  if (const YAML::Node a = root["adam"]) {
    config::check_keys(a, {"beta1", "beta2", "epsilon"}, "adam");
    read(a, "beta1", c.beta1, "adam");
    read(a, "beta2", c.beta2, "adam");
    read(a, "epsilon", c.epsilon, "adam");
  }
  if (const YAML::Node n = root["network"]) {
    config::check_keys(n, {"depth", "base_channels"}, "network");
    read(n, "depth", c.depth, "network");
    read(n, "base_channels", c.base_channels, "network");
  }
  if (const YAML::Node p = root["phantom"]) parse_phantom(p, c.phantom);
  if (const YAML::Node k = root["corruption"]) parse_corruption(k, c.corruption);
  if (!(c.lr > 0)) throw ConfigError("train.lr: must be positive, got " + fmt(c.lr) + config::where(root["lr"]));
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) { return parse_config(config::load_file(path)); }

void emit_config(YAML::Emitter& out, const TrainConfig& c) {
  using YAML::Key, YAML::Value;
  out << YAML::BeginMap;
  out << Key << "task" << Value << net::task_name(c.task);
  out << Key << "lr" << Value << fmt(c.lr);
  out << Key << "batch_size" << Value << c.batch_size;
  out << Key << "iterations" << Value << c.iterations;
  out << Key << "seed" << Value << c.seed;
  out << Key << "phantoms" << Value << c.phantoms;
  out << Key << "phantom_seed_start" << Value << c.phantom_seed_start;
  out << Key << "checkpoint_every" << Value << c.checkpoint_every;
  out << Key << "validation_every" << Value << c.validation_every;
  out << Key << "validation_probe" << Value << c.validation_probe;
  out << Key << "adam" << Value << YAML::BeginMap << Key << "beta1" << Value << fmt(c.beta1) << Key << "beta2"
      << Value << fmt(c.beta2) << Key << "epsilon" << Value << fmt(c.epsilon) << YAML::EndMap;
  out << Key << "network" << Value << YAML::BeginMap << Key << "depth" << Value << c.depth << Key << "base_channels"
      << Value << c.base_channels << YAML::EndMap;
  const auto& p = c.phantom;
  out << Key << "phantom" << Value << YAML::BeginMap;
  out << Key << "size" << Value << p.size << Key << "min_ellipses" << Value << p.min_ellipses << Key
      << "max_ellipses" << Value << p.max_ellipses << Key << "ribbon_thickness" << Value << p.ribbon_thickness << Key
      << "skull_thickness" << Value << p.skull_thickness << Key << "smoothing_radius" << Value << p.smoothing_radius;
  out << Key << "class_mean" << Value << YAML::Flow << YAML::BeginSeq;
  for (double v : p.class_mean) out << fmt(v);
  out << YAML::EndSeq << Key << "texture_amplitude" << Value << YAML::Flow << YAML::BeginSeq;
  for (double v : p.texture_amplitude) out << fmt(v);
  out << YAML::EndSeq << YAML::EndMap;
  const auto& d = c.corruption;
  out << Key << "corruption" << Value << YAML::BeginMap;
  out << Key << "rician_weight" << Value << fmt(d.rician_weight) << Key << "motion_weight" << Value
      << fmt(d.motion_weight) << Key << "bias_weight" << Value << fmt(d.bias_weight) << Key << "compose_probability"
      << Value << fmt(d.compose_probability) << Key << "snr_min_db" << Value << fmt(d.snr_min_db) << Key
      << "snr_max_db" << Value << fmt(d.snr_max_db) << Key << "max_shift_px" << Value << fmt(d.max_shift_px) << Key
      << "max_rotation_deg" << Value << fmt(d.max_rotation_deg) << Key << "max_bias_coefficient" << Value
      << fmt(d.max_bias_coefficient);
  out << YAML::EndMap;
  out << YAML::EndMap;
}

std::string serialise_config(const TrainConfig& config) {
  YAML::Emitter out;
  emit_config(out, config);
  return std::string(out.c_str()) + "\n";
}

std::vector<Example> validation_examples(const TrainConfig& config, const phantom::SeedSplit& split) {
  std::vector<Example> out;
  out.reserve(split.valid.size());
  for (std::size_t k = 0; k < split.valid.size(); ++k) {
    const phantom::Phantom p = phantom::generate(config.phantom, split.valid[k]);
    Rng rng = make_rng({config.seed, kValidStream, k});
    const corrupt::Recipe recipe = corrupt::sample_recipe(config.corruption, config.phantom.size, rng);
    out.push_back(Example{corrupt::apply_recipe(p.image, recipe, derive_seed({config.seed, kValidStream, k, 1})),
                          p.image, phantom::ribbon_mask(p.labels), p.seed});
  }
  return out;
}

LossRow evaluate_loss(const net::Model& model, const std::vector<Example>& examples, std::size_t iter) {
  LossRow sum{iter, 0, 0, 0};
  for (const Example& ex : examples) {
    ad::Graph<float> g;
    std::vector<ad::Var<float>> vars;
    for (const auto& p : model.params()) vars.push_back(g.constant(p.tensor));
    const auto pred = net::forward(g, model.spec(), vars, g.constant(net::image_to_tensor<float>(ex.input)));
    const auto lb = net::task_loss(g, pred, g.constant(net::image_to_tensor<float>(ex.clean)),
                                   g.constant(net::image_to_tensor<float>(mask_to_image(ex.ribbon))));
    sum.l_reg += g.value(lb.l_reg).item();
    sum.l_seg += g.value(lb.l_seg).item();
    sum.l_total += g.value(lb.l_total).item();
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, examples.size()));
  return LossRow{iter, sum.l_reg / n, sum.l_seg / n, sum.l_total / n};
}

void write_losses_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
  std::ostringstream os;
  os << "iter,l_reg,l_seg,l_total\n";
  for (const auto& r : rows) os << r.iter << ',' << fmt(r.l_reg) << ',' << fmt(r.l_seg) << ',' << fmt(r.l_total) << '\n';
  write_text(path, os.str());
}

net::Model initial_model(const TrainConfig& config) {
  net::Model model = net::Model::initialise(config.network(), derive_seed({config.seed, kInitStream}));
  // The untrained network returns its input and a zero logit. The
  // reconstruction log-variance starts at the log of the lower-quartile
  // per-example mean squared corruption error over calibration draws.
  const auto seeds = phantom::seed_range(config.phantom_seed_start, config.phantoms);
  const phantom::SeedSplit split = phantom::split(seeds);
  std::vector<double> errors;
  for (std::size_t k = 0; k < kCalibrationExamples && !split.train.empty(); ++k) {
    Rng rng = make_rng({config.seed, kCalibStream, k});
    const std::uint64_t pick = split.train[std::uniform_int_distribution<std::size_t>(0, split.train.size() - 1)(rng)];
    const phantom::Phantom p = phantom::generate(config.phantom, pick);
    const corrupt::Recipe recipe = corrupt::sample_recipe(config.corruption, config.phantom.size, rng);
    const ImageGrid x = corrupt::apply_recipe(p.image, recipe, derive_seed({config.seed, kCalibStream, k, 1}));
    errors.push_back(mse(x, p.image));
  }
  auto set_bias = [&](const std::string& name, double value) {
    for (auto& p : model.params())
      if (p.name == name) p.tensor[0] = static_cast<float>(std::clamp(value, net::kLogVarMin, net::kLogVarMax));
  };
  if (!errors.empty()) {
    auto quartile = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 4);
    std::nth_element(errors.begin(), quartile, errors.end());
    if (*quartile > 0) set_bias("head_r.logvar.b", std::log(*quartile));
  }
  if (config.task == net::Task::MultiTask) set_bias("head_s.logvar.b", std::log(2.0 * std::log(2.0)));
  return model;
}

TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir, const Progress& progress) {
  config.validate();
  const auto seeds = phantom::seed_range(config.phantom_seed_start, config.phantoms);

  TrainResult result{initial_model(config), phantom::split(seeds), {}, {}, {}};
  if (result.split.train.empty()) throw ConfigError("train split is empty");

  std::vector<phantom::Phantom> train_set;
  train_set.reserve(result.split.train.size());
  for (auto s : result.split.train) train_set.push_back(phantom::generate(config.phantom, s));
  const std::vector<Example> valid = validation_examples(config, result.split);

  auto adam = ad::AdamState<float>::init(result.model.params(),
                                         ad::AdamHyper{config.lr, config.beta1, config.beta2, config.epsilon});

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  auto flush = [&](const std::string& status, const std::string& detail) {
    if (out_dir.empty()) return;
    checkpoint::save(out_dir / "model.uqr", result.model);
    write_losses_csv(out_dir / "losses.csv", result.losses);
    write_losses_csv(out_dir / "validation.csv", result.validation);
    write_audit_csv(out_dir / "audit.csv", result.audit);
    YAML::Emitter m;
    m << YAML::BeginMap;
    m << YAML::Key << "command" << YAML::Value << "train";
    m << YAML::Key << "status" << YAML::Value << status;
    if (!detail.empty()) m << YAML::Key << "detail" << YAML::Value << detail;
    m << YAML::Key << "config" << YAML::Value;
    emit_config(m, config);
    m << YAML::Key << "split" << YAML::Value << YAML::BeginMap;
    emit_seeds(m, "train", result.split.train);
    emit_seeds(m, "valid", result.split.valid);
    emit_seeds(m, "test", result.split.test);
    m << YAML::EndMap;
    m << YAML::Key << "iterations_completed" << YAML::Value << result.losses.size();
    m << YAML::Key << "outputs" << YAML::Value << YAML::Flow << YAML::BeginSeq << "model.uqr" << "losses.csv"
      << "validation.csv" << "audit.csv" << YAML::EndSeq;
    m << YAML::EndMap;
    write_text(out_dir / "manifest.yaml", std::string(m.c_str()) + "\n");
  };

  auto wants_validation = [&](std::size_t iter) {
    if (valid.empty()) return false;
    if (iter == 0 || iter == config.iterations) return true;
    if (config.validation_probe && iter == config.validation_probe) return true;
    return config.validation_every && iter % config.validation_every == 0;
  };
  if (wants_validation(0)) result.validation.push_back(evaluate_loss(result.model, valid, 0));

  for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
    try {
      Rng rng = make_rng({config.seed, kIterStream, iter});
      std::vector<ad::Tensor<float>> grads;
      LossRow row{iter, 0, 0, 0};
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, train_set.size() - 1)(rng);
        const phantom::Phantom& ph = train_set[pick];
        const corrupt::Recipe recipe = corrupt::sample_recipe(config.corruption, config.phantom.size, rng);
        const std::uint64_t cseed = derive_seed({config.seed, kCorruptStream, iter, b});
        const Example ex{corrupt::apply_recipe(ph.image, recipe, cseed), ph.image, phantom::ribbon_mask(ph.labels),
                         ph.seed};
        result.audit.push_back(AuditRow{iter, ph.seed, cseed, corrupt::describe(recipe)});
        StepResult step = gradient_step(result.model, ex, iter);
        row.l_reg += step.row.l_reg;
        row.l_seg += step.row.l_seg;
        row.l_total += step.row.l_total;
        if (grads.empty()) {
          grads = std::move(step.grads);
        } else {
          for (std::size_t k = 0; k < grads.size(); ++k)
            for (std::size_t i = 0; i < grads[k].size(); ++i) grads[k][i] += step.grads[k][i];
        }
      }
      if (config.batch_size > 1) {
        const float inv = 1.0f / static_cast<float>(config.batch_size);
        for (auto& gt : grads)
          for (float& v : gt.values()) v *= inv;
        const double n = static_cast<double>(config.batch_size);
        row = LossRow{iter, row.l_reg / n, row.l_seg / n, row.l_total / n};
      }
      ad::adam_step(result.model.params(), grads, adam);
      result.losses.push_back(row);
      if (progress) progress(row);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Numeric) throw;
      const std::string msg = "training aborted at iteration " + std::to_string(iter) + ": " + e.what();
      flush("aborted", msg);
      throw NumericError(msg);
    }
    if (wants_validation(iter)) result.validation.push_back(evaluate_loss(result.model, valid, iter));
    if (config.checkpoint_every && iter % config.checkpoint_every == 0 && iter != config.iterations)
      flush("running", "");
  }
  flush("completed", "");
  return result;
}

}  // namespace uqr::train
