#include "core/heteronet.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

#include "core/rng.hpp"

namespace uqr::net {

std::string task_name(Task task) { return task == Task::Reconstruction ? "recon" : "multitask"; }

Task parse_task(const std::string& name) {
  if (name == "recon") return Task::Reconstruction;
  if (name == "multitask") return Task::MultiTask;
  throw ConfigError("unknown task '" + name + "' (expected recon or multitask)");
}

void NetworkSpec::validate() const {
  if (depth < 1 || depth > 6) throw ConfigError("network depth must lie in [1,6]");
  if (base_channels < 1 || base_channels > 256) throw ConfigError("network base_channels must lie in [1,256]");
  const std::size_t div = std::size_t{1} << depth;
  if (height == 0 || width == 0 || height % div != 0 || width % div != 0)
    throw ShapeError("network input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by 2^depth = " + std::to_string(div));
}

namespace {

std::size_t channels_at(const NetworkSpec& spec, int level) {
  return static_cast<std::size_t>(spec.base_channels) << level;
}

void add_conv(std::vector<ParamInfo>& out, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
              bool zero_weights = false) {
  out.push_back(ParamInfo{name + ".w", Shape{cout, cin, k, k}, cin * k * k, zero_weights});
  out.push_back(ParamInfo{name + ".b", Shape{cout}, 0, true});
}

void add_decoder(std::vector<ParamInfo>& out, const NetworkSpec& spec, const std::string& prefix) {
  for (int l = spec.depth - 1; l >= 0; --l) {
    const std::size_t c = channels_at(spec, l);
    add_conv(out, prefix + ".up" + std::to_string(l), channels_at(spec, l + 1), c, 3);
    add_conv(out, prefix + ".fuse" + std::to_string(l), 2 * c, c, 3);
  }
}

template <typename T>
class Binder {
 public:
  Binder(const std::vector<ParamInfo>& layout, const std::vector<Var<T>>& params) {
    if (layout.size() != params.size())
      throw ContractError("forward: expected " + std::to_string(layout.size()) + " parameters, got " +
                          std::to_string(params.size()));
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (params[i].value().shape() != layout[i].shape)
        throw ShapeError("parameter " + layout[i].name + " has shape " + ad::shape_str(params[i].value().shape()) +
                         ", expected " + ad::shape_str(layout[i].shape));
      index_.emplace(layout[i].name, params[i]);
    }
  }
  Var<T> operator()(const std::string& name) const { return index_.at(name); }

 private:
  std::unordered_map<std::string, Var<T>> index_;
};

template <typename T>
Var<T> conv(const Binder<T>& p, const std::string& name, Var<T> x, int stride = 1) {
  Var<T> w = p(name + ".w");
  const int pad = static_cast<int>(w.value().dim(2) / 2);
  return ad::add_bias(ad::conv2d(x, w, stride, pad), p(name + ".b"));
}

template <typename T>
Var<T> conv_act(const Binder<T>& p, const std::string& name, Var<T> x, int stride = 1) {
  return ad::leaky_relu(conv(p, name, x, stride), T(0.01));
}

template <typename T>
Var<T> decode(const Binder<T>& p, const NetworkSpec& spec, const std::string& prefix, Var<T> bottom,
              const std::vector<Var<T>>& skips) {
  Var<T> h = bottom;
  for (int l = spec.depth - 1; l >= 0; --l) {
    h = conv_act(p, prefix + ".up" + std::to_string(l), ad::upsample2x(h));
    h = conv_act(p, prefix + ".fuse" + std::to_string(l), ad::concat_channels(h, skips[l]));
  }
  return h;
}

template <typename T>
Var<T> logvar_head(const Binder<T>& p, const std::string& name, Var<T> features) {
  return ad::clamp(conv(p, name, features), T(kLogVarMin), T(kLogVarMax));
}

}  // namespace

std::vector<ParamInfo> parameter_layout(const NetworkSpec& spec) {
  spec.validate();
  std::vector<ParamInfo> out;
  add_conv(out, "enc0.a", 1, channels_at(spec, 0), 3);
  add_conv(out, "enc0.b", channels_at(spec, 0), channels_at(spec, 0), 3);
  for (int l = 1; l <= spec.depth; ++l) {
    add_conv(out, "enc" + std::to_string(l) + ".down", channels_at(spec, l - 1), channels_at(spec, l), 3);
    add_conv(out, "enc" + std::to_string(l) + ".b", channels_at(spec, l), channels_at(spec, l), 3);
  }
  const std::size_t c0 = channels_at(spec, 0);
  add_decoder(out, spec, "dec_r");
  add_conv(out, "head_r.mean", c0, 1, 1, true);
  add_conv(out, "head_r.logvar", c0, 1, 1, true);
  if (spec.has_segmentation()) {
    add_decoder(out, spec, "dec_s");
    add_conv(out, "head_s.logit", c0, 1, 1, true);
    add_conv(out, "head_s.logvar", c0, 1, 1, true);
  }
  return out;
}

template <typename T>
ParameterSet<T> init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  ParameterSet<T> out;
  std::size_t index = 0;
  for (const ParamInfo& info : parameter_layout(spec)) {
    Tensor<T> t = Tensor<T>::zeros(info.shape);
    if (!info.zero_init) {
      Rng rng = make_rng({seed, 0x1417u, index});
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(info.fan_in)));
      for (T& v : t.values()) v = static_cast<T>(normal(rng));
    }
    out.push_back({info.name, std::move(t)});
    ++index;
  }
  return out;
}

template <typename T>
PredictionBundle<T> forward(Graph<T>& g, const NetworkSpec& spec, const std::vector<Var<T>>& params, Var<T> x) {
  const Shape expected{1, spec.height, spec.width};
  if (g.value(x).shape() != expected)
    throw ShapeError("network input has shape " + ad::shape_str(g.value(x).shape()) + ", expected " +
                     ad::shape_str(expected));
  Binder<T> p(parameter_layout(spec), params);

  std::vector<Var<T>> skips;
  Var<T> h = conv_act(p, "enc0.b", conv_act(p, "enc0.a", x));
  skips.push_back(h);
  for (int l = 1; l <= spec.depth; ++l) {
    const std::string name = "enc" + std::to_string(l);
    h = conv_act(p, name + ".b", conv_act(p, name + ".down", h, 2));
    if (l < spec.depth) skips.push_back(h);
  }

  PredictionBundle<T> out;
  Var<T> fr = decode(p, spec, "dec_r", h, skips);
  out.recon_mean = ad::add(x, conv(p, "head_r.mean", fr));
  out.recon_logvar = logvar_head(p, "head_r.logvar", fr);
  if (spec.has_segmentation()) {
    Var<T> fs = decode(p, spec, "dec_s", h, skips);
    out.seg_logit = conv(p, "head_s.logit", fs);
    out.seg_logvar = logvar_head(p, "head_s.logvar", fs);
    out.has_segmentation = true;
  }
  return out;
}

template <typename T>
Var<T> loss_reg(Var<T> target, Var<T> mean, Var<T> logvar, Var<T>* terms) {
  if (target.shape() != mean.shape() || mean.shape() != logvar.shape())
    throw ShapeError("loss_reg: target, mean and log-variance shapes differ");
  Var<T> residual2 = ad::square(ad::sub(target, mean));
  Var<T> per_pixel = ad::add(ad::mul_scalar(ad::mul(ad::exp(ad::mul_scalar(logvar, T(-1))), residual2), T(0.5)),
                             ad::mul_scalar(logvar, T(0.5)));
  if (terms) *terms = per_pixel;
  return ad::mean(per_pixel);
}

template <typename T>
Var<T> loss_seg(Var<T> target, Var<T> logit, Var<T> logvar, Var<T>* terms) {
  if (target.shape() != logit.shape() || logit.shape() != logvar.shape())
    throw ShapeError("loss_seg: target, logit and log-variance shapes differ");
  Graph<T>& g = *target.graph;
  // For y in {0,1}, CE(y, sigmoid(z)) = softplus((1 - 2y) z).
  Tensor<T> sign = g.value(target);
  for (std::size_t i = 0; i < sign.size(); ++i) {
    if (sign[i] != T(0) && sign[i] != T(1)) throw DomainError("loss_seg: target is not binary", i);
    sign[i] = T(1) - T(2) * sign[i];
  }
  Var<T> ce = ad::softplus(ad::mul(logit, g.constant(std::move(sign))));
  Var<T> per_pixel = ad::add(ad::mul(ad::exp(ad::mul_scalar(logvar, T(-1))), ce), ad::mul_scalar(logvar, T(0.5)));
  if (terms) *terms = per_pixel;
  return ad::mean(per_pixel);
}

template <typename T>
LossBreakdown<T> task_loss(Graph<T>& g, const PredictionBundle<T>& pred, Var<T> recon_target, Var<T> seg_target) {
  LossBreakdown<T> out;
  out.l_reg = loss_reg(recon_target, pred.recon_mean, pred.recon_logvar, &out.reg_terms);
  if (pred.has_segmentation) {
    out.l_seg = loss_seg(seg_target, pred.seg_logit, pred.seg_logvar, &out.seg_terms);
  } else {
    out.l_seg = g.constant(Tensor<T>::scalar(T(0)));
    out.seg_terms = out.l_seg;
  }
  out.l_total = loss_total(out.l_reg, out.l_seg);
  return out;
}

// ---- Model ------------------------------------------------------------------

Model::Model(NetworkSpec spec, ParameterSet<float> params) : spec_(spec), params_(std::move(params)) {
  auto layout = parameter_layout(spec_);
  if (layout.size() != params_.size())
    throw ShapeError("model has " + std::to_string(params_.size()) + " parameters, spec needs " +
                     std::to_string(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name != params_[i].name || layout[i].shape != params_[i].tensor.shape())
      throw ShapeError("parameter " + params_[i].name + " does not match spec entry " + layout[i].name);
}

Model Model::initialise(const NetworkSpec& spec, std::uint64_t seed) {
  return Model(spec, init_parameters<float>(spec, seed));
}

Prediction Model::predict(const ImageGrid& image) const {
  if (image.height() != spec_.height || image.width() != spec_.width)
    throw ShapeError("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     " does not match network input " + std::to_string(spec_.height) + "x" +
                     std::to_string(spec_.width));
  Graph<float> g;
  std::vector<Var<float>> bound;
  bound.reserve(params_.size());
  for (const auto& p : params_) bound.push_back(g.constant(p.tensor));
  PredictionBundle<float> b = forward(g, spec_, bound, g.constant(image_to_tensor<float>(image)));
  Prediction out;
  out.recon_mean = tensor_to_image(g.value(b.recon_mean));
  out.recon_logvar = tensor_to_image(g.value(b.recon_logvar));
  if (b.has_segmentation) {
    out.seg_logit = tensor_to_image(g.value(b.seg_logit));
    out.seg_logvar = tensor_to_image(g.value(b.seg_logvar));
    out.has_segmentation = true;
  }
  return out;
}

template <typename T>
Tensor<T> image_to_tensor(const ImageGrid& image) {
  std::vector<T> v(image.values().begin(), image.values().end());
  return Tensor<T>({1, image.height(), image.width()}, std::move(v));
}

ImageGrid tensor_to_image(const Tensor<float>& t) {
  if (t.rank() != 3 || t.dim(0) != 1) throw ShapeError("expected a [1,H,W] tensor, got " + ad::shape_str(t.shape()));
  return ImageGrid(t.dim(1), t.dim(2), std::vector<double>(t.values().begin(), t.values().end()));
}

ImageGrid sigma_from_logvar(const ImageGrid& logvar) {
  ImageGrid out(logvar.height(), logvar.width());
  for (std::size_t i = 0; i < logvar.size(); ++i)
    out[i] = std::exp(0.5 * std::clamp(logvar[i], kLogVarMin, kLogVarMax));
  return out;
}

#define UQR_INSTANTIATE(T)                                                                              \
  template ParameterSet<T> init_parameters<T>(const NetworkSpec&, std::uint64_t);                       \
  template PredictionBundle<T> forward(Graph<T>&, const NetworkSpec&, const std::vector<Var<T>>&, Var<T>); \
  template Var<T> loss_reg(Var<T>, Var<T>, Var<T>, Var<T>*);                                            \
  template Var<T> loss_seg(Var<T>, Var<T>, Var<T>, Var<T>*);                                            \
  template LossBreakdown<T> task_loss(Graph<T>&, const PredictionBundle<T>&, Var<T>, Var<T>);           \
  template Tensor<T> image_to_tensor<T>(const ImageGrid&);

UQR_INSTANTIATE(float)
UQR_INSTANTIATE(double)

#undef UQR_INSTANTIATE

}  // namespace uqr::net
