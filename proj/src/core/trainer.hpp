#pragma once

// Training loop with on-the-fly corruption.
//
// Iteration i draws a training phantom and a corruption recipe from a
// stream seeded by (seed, i), so a run is a pure function of its config.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "core/adam.hpp"
#include "core/corrupt.hpp"
#include "core/heteronet.hpp"
#include "core/phantom.hpp"

namespace uqr::train {

struct TrainConfig {
  net::Task task = net::Task::Reconstruction;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 1;
  std::size_t iterations = 5000;
  std::uint64_t seed = 1;
  std::size_t phantoms = 100;
  std::uint64_t phantom_seed_start = 0;
  std::size_t checkpoint_every = 1000;  // 0 disables intermediate checkpoints
  std::size_t validation_every = 250;   // 0 disables the periodic probe
  std::size_t validation_probe = 100;   // extra early probe; 0 disables
  int depth = 3;
  int base_channels = 8;
  phantom::PhantomConfig phantom;
  corrupt::CorruptionDistribution corruption;

  void validate() const;
  net::NetworkSpec network() const;
  bool operator==(const TrainConfig&) const = default;
};

// Strict parse: unknown keys are errors; missing keys keep their defaults.
TrainConfig parse_config(const YAML::Node& root);
TrainConfig load_config(const std::filesystem::path& path);
// Full resolved config, every field written.
void emit_config(YAML::Emitter& out, const TrainConfig& config);
std::string serialise_config(const TrainConfig& config);

struct LossRow {
  std::size_t iter;
  double l_reg, l_seg, l_total;
};

struct AuditRow {
  std::size_t iter;
  std::uint64_t phantom_seed;
  std::uint64_t corruption_seed;
  std::string recipe;
};

struct TrainResult {
  net::Model model;
  phantom::SeedSplit split;
  std::vector<LossRow> losses;
  std::vector<LossRow> validation;
  std::vector<AuditRow> audit;
};

// Parameters before the first update.
net::Model initial_model(const TrainConfig& config);

using Progress = std::function<void(const LossRow&)>;

// Trains from scratch. With a non-empty out_dir the run writes model.uqr,
// losses.csv, validation.csv, audit.csv and manifest.yaml there. A
// non-finite loss or gradient writes the last good parameters and the logs
// so far, then throws NumericError naming the iteration.
TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir = {}, const Progress& progress = {});

// Fixed validation pairs: each valid phantom with a recipe seeded by its
// position in the split, identical across iterations and runs.
struct Example {
  ImageGrid input;
  ImageGrid clean;
  MaskGrid ribbon;
  std::uint64_t phantom_seed;
};
std::vector<Example> validation_examples(const TrainConfig& config, const phantom::SeedSplit& split);

// Mean task losses of a model over examples (no gradients).
LossRow evaluate_loss(const net::Model& model, const std::vector<Example>& examples, std::size_t iter);

void write_losses_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);

}  // namespace uqr::train
