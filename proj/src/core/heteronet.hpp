#pragma once

// Residual encoder-decoder with heteroscedastic output heads.
//
// The encoder halves the spatial extent `depth` times with stride-2
// convolutions, doubling channels each time. Each decoder climbs back with
// nearest-neighbour upsampling followed by a convolution and fuses the
// matching encoder skip. The reconstruction decoder ends in two 1x1 heads:
// a residual added to the input, and a log-variance map. The multi-task
// network adds a second decoder on the same encoder with a segmentation
// logit head and its own log-variance head.

#include <cstdint>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/autodiff.hpp"
#include "core/grid.hpp"

namespace uqr::net {

using ad::Graph;
using ad::ParameterSet;
using ad::Shape;
using ad::Tensor;
using ad::Var;

enum class Task { Reconstruction, MultiTask };

std::string task_name(Task task);
Task parse_task(const std::string& name);

// Log-variance outputs are clamped to this range.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct NetworkSpec {
  int depth = 3;
  int base_channels = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  Task task = Task::Reconstruction;

  void validate() const;
  bool has_segmentation() const { return task == Task::MultiTask; }
  bool operator==(const NetworkSpec&) const = default;
};

struct ParamInfo {
  std::string name;
  Shape shape;
  std::size_t fan_in;   // 0 for biases
  bool zero_init;       // final head layers and all biases
};

// Ordered parameter inventory; checkpoints and optimisers follow this order.
std::vector<ParamInfo> parameter_layout(const NetworkSpec& spec);

// Fan-in scaled Gaussian weights (std = sqrt(2 / fan_in)), zero biases,
// zero final head layers.
template <typename T>
ParameterSet<T> init_parameters(const NetworkSpec& spec, std::uint64_t seed);

template <typename T>
struct PredictionBundle {
  Var<T> recon_mean;    // input + residual head
  Var<T> recon_logvar;  // s_r = log sigma_r^2, clamped
  Var<T> seg_logit;     // multi-task only
  Var<T> seg_logvar;    // s_s = log sigma_s^2, clamped; multi-task only
  bool has_segmentation = false;
};

// params must be bound in parameter_layout order; x has shape [1,H,W].
template <typename T>
PredictionBundle<T> forward(Graph<T>& g, const NetworkSpec& spec, const std::vector<Var<T>>& params, Var<T> x);

template <typename T>
struct LossBreakdown {
  Var<T> l_reg;
  Var<T> l_seg;
  Var<T> l_total;
  Var<T> reg_terms;  // per-pixel terms before the mean
  Var<T> seg_terms;
};

// Per pixel 0.5 * exp(-s) * (y - f)^2 + 0.5 * s, averaged over pixels.
template <typename T>
Var<T> loss_reg(Var<T> target, Var<T> mean, Var<T> logvar, Var<T>* terms = nullptr);

// Per pixel exp(-s) * CE(y, sigmoid(z)) + 0.5 * s, averaged over pixels.
// target holds 0/1 values.
template <typename T>
Var<T> loss_seg(Var<T> target, Var<T> logit, Var<T> logvar, Var<T>* terms = nullptr);

template <typename T>
Var<T> loss_total(Var<T> l_reg, Var<T> l_seg) {
  return ad::add(l_reg, l_seg);
}

// Task loss for one example. seg_target is ignored without a segmentation head.
template <typename T>
LossBreakdown<T> task_loss(Graph<T>& g, const PredictionBundle<T>& pred, Var<T> recon_target, Var<T> seg_target);

// Parameters plus spec: the unit that is trained, checkpointed and queried.
struct Prediction {
  ImageGrid recon_mean;
  ImageGrid recon_logvar;
  ImageGrid seg_logit;   // empty grids for reconstruction-only models
  ImageGrid seg_logvar;
  bool has_segmentation = false;
};

class Model {
 public:
  Model(NetworkSpec spec, ParameterSet<float> params);
  static Model initialise(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const ParameterSet<float>& params() const noexcept { return params_; }
  ParameterSet<float>& params() noexcept { return params_; }

  Prediction predict(const ImageGrid& image) const;

 private:
  NetworkSpec spec_;
  ParameterSet<float> params_;
};

template <typename T>
Tensor<T> image_to_tensor(const ImageGrid& image);
ImageGrid tensor_to_image(const Tensor<float>& t);
// sigma = exp(s / 2) per pixel
ImageGrid sigma_from_logvar(const ImageGrid& logvar);

}  // namespace uqr::net
