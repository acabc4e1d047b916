#include "neurotube/unet.hpp"

#include <cmath>

#include "neurotube/error.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

namespace {

std::string level_name(const char* prefix, std::size_t level) {
  return std::string(prefix) + std::to_string(level);
}

const Tensor& param(const ParamStore& params, const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) throw StateError("missing parameter '" + name + "'");
  return it->second;
}

Tensor he_uniform(Shape shape, std::size_t fan_in, std::uint64_t seed, const std::string& name) {
  Rng rng(derive_seed(seed, {fnv1a(name)}));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<real> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<real>(rng.uniform(-bound, bound));
  return Tensor(std::move(shape), std::move(data), true);
}

void add_conv(ParamStore& p, const std::string& name, std::size_t cin, std::size_t cout,
              std::size_t k, std::uint64_t seed) {
  p[name + ".weight"] = he_uniform({cout, cin, k, k, k}, cin * k * k * k, seed, name + ".weight");
  p[name + ".bias"] = Tensor({cout}, real(0), true);
}

void add_norm(ParamStore& p, const std::string& name, std::size_t channels) {
  p[name + ".gamma"] = Tensor({channels}, real(1), true);
  p[name + ".beta"] = Tensor({channels}, real(0), true);
}

void add_double_conv(ParamStore& p, const UNetConfig& c, const std::string& block, std::size_t cin,
                     std::size_t cout, std::uint64_t seed) {
  add_conv(p, block + ".conv1", cin, cout, 3, seed);
  add_conv(p, block + ".conv2", cout, cout, 3, seed);
  if (c.use_groupnorm) {
    add_norm(p, block + ".norm1", cout);
    add_norm(p, block + ".norm2", cout);
  }
}

Tensor conv_block(const UNetConfig& c, const ParamStore& p, const std::string& name,
                  const std::string& norm, const Tensor& x) {
  Tensor y = ops::conv3d(x, param(p, name + ".weight"), param(p, name + ".bias"), 1, 1);
  if (c.use_groupnorm)
    y = ops::group_norm(y, param(p, norm + ".gamma"), param(p, norm + ".beta"), y.dim(0));
  return ops::relu(y);
}

Tensor double_conv(const UNetConfig& c, const ParamStore& p, const std::string& block,
                   const Tensor& x) {
  Tensor y = conv_block(c, p, block + ".conv1", block + ".norm1", x);
  return conv_block(c, p, block + ".conv2", block + ".norm2", y);
}

void check_input(const UNetConfig& config, const Tensor& input) {
  if (input.rank() != 4 || input.dim(0) != config.in_channels)
    throw DimensionError("model input must be [" + std::to_string(config.in_channels) +
                         ",Z,Y,X], got " + shape_str(input.shape()));
}

Dims3 spatial_dims(const Tensor& input) { return {input.dim(3), input.dim(2), input.dim(1)}; }

}  // namespace

std::vector<ops::Window3> pooling_plan(const UNetConfig& config, const Dims3& dims) {
  std::vector<ops::Window3> plan;
  Dims3 cur = dims;
  for (std::size_t level = 0; level < config.depth; ++level) {
    if (cur.x % 2 || cur.y % 2 || cur.x < 2 || cur.y < 2)
      throw DimensionError("input " + dims.str() + " is not divisible by 2^" +
                           std::to_string(config.depth) + " in x and y");
    ops::Window3 w{1, 2, 2};
    if (cur.z / 2 >= 2) {
      if (cur.z % 2)
        throw DimensionError("input " + dims.str() + " has a z extent that cannot be pooled");
      w.d = 2;
    }
    cur = {cur.x / 2, cur.y / 2, cur.z / w.d};
    plan.push_back(w);
  }
  return plan;
}

Shape bottleneck_shape(const UNetConfig& config, const Dims3& dims) {
  Dims3 cur = dims;
  for (const auto& w : pooling_plan(config, dims)) cur = {cur.x / w.w, cur.y / w.h, cur.z / w.d};
  return {config.bottleneck_channels(), cur.z, cur.y, cur.x};
}

AuxHeadConfig make_aux_config(const UNetConfig& config, const Dims3& aux_input,
                              std::size_t num_classes, std::size_t hidden_units) {
  return {hidden_units, num_classes, shape_numel(bottleneck_shape(config, aux_input))};
}

bool is_encoder_param(const std::string& name) {
  return name.rfind("enc", 0) == 0 || name.rfind("bottleneck.", 0) == 0;
}

bool is_aux_param(const std::string& name) { return name.rfind("aux.", 0) == 0; }

ParamStore init_unet_params(const UNetConfig& config, std::uint64_t seed) {
  if (config.depth == 0 || config.base_channels == 0 || config.in_channels == 0 ||
      config.out_channels == 0)
    throw ArgumentError("UNetConfig: depth and channel counts must be positive");
  ParamStore p;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::size_t cin = i == 0 ? config.in_channels : config.channels_at(i - 1);
    add_double_conv(p, config, level_name("enc", i), cin, config.channels_at(i), seed);
  }
  add_double_conv(p, config, "bottleneck", config.channels_at(config.depth - 1),
                  config.bottleneck_channels(), seed);
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::size_t below = config.channels_at(i + 1), c = config.channels_at(i);
    const std::string block = level_name("dec", i);
    p[block + ".up.weight"] = he_uniform({below, c, 2, 2, 2}, below, seed, block + ".up.weight");
    add_double_conv(p, config, block, 2 * c, c, seed);
  }
  add_conv(p, "head", config.channels_at(0), config.out_channels, 1, seed);
  return p;
}

ParamStore init_aux_params(const AuxHeadConfig& config, std::uint64_t seed) {
  if (config.input_features == 0 || config.hidden_units == 0 || config.num_classes == 0)
    throw ArgumentError("AuxHeadConfig: sizes must be positive");
  ParamStore p;
  p["aux.fc1.weight"] = he_uniform({config.hidden_units, config.input_features},
                                   config.input_features, seed, "aux.fc1.weight");
  p["aux.fc1.bias"] = Tensor({config.hidden_units}, real(0), true);
  p["aux.fc2.weight"] = he_uniform({config.num_classes, config.hidden_units}, config.hidden_units,
                                   seed, "aux.fc2.weight");
  p["aux.fc2.bias"] = Tensor({config.num_classes}, real(0), true);
  return p;
}

std::size_t parameter_count(const ParamStore& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

Tensor volume_to_tensor(const Volume& volume, bool requires_grad) {
  const auto& d = volume.dims;
  return Tensor({1, d.z, d.y, d.x}, std::vector<real>(volume.data.begin(), volume.data.end()),
                requires_grad);
}

Volume tensor_to_volume(const Tensor& t, VolumeKind kind) {
  if (t.rank() != 4 || t.dim(0) != 1)
    throw DimensionError("tensor_to_volume: expected [1,Z,Y,X], got " + shape_str(t.shape()));
  Volume v({t.dim(3), t.dim(2), t.dim(1)}, 0.0f, kind);
  const auto d = t.data();
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(d[i]);
  return v;
}

EncoderOutput encoder_pass(const UNetConfig& config, const ParamStore& params, const Tensor& input) {
  check_input(config, input);
  EncoderOutput out;
  out.plan = pooling_plan(config, spatial_dims(input));
  Tensor x = input;
  for (std::size_t i = 0; i < config.depth; ++i) {
    x = double_conv(config, params, level_name("enc", i), x);
    out.skips.push_back(x);
    x = ops::maxpool3d(x, out.plan[i]);
  }
  out.bottleneck = double_conv(config, params, "bottleneck", x);
  return out;
}

Tensor encoder_forward(const UNetConfig& config, const ParamStore& params, const Tensor& input) {
  return encoder_pass(config, params, input).bottleneck;
}

Tensor unet_forward(const UNetConfig& config, const ParamStore& params, const Tensor& input) {
  check_input(config, input);
  const Dims3 dims = spatial_dims(input);
  for (const auto& w : pooling_plan(config, dims))
    if (!(w == ops::Window3{2, 2, 2}))
      throw DimensionError("unet_forward: input " + dims.str() + " must be divisible by 2^" +
                           std::to_string(config.depth) + " on every axis");
  EncoderOutput enc = encoder_pass(config, params, input);
  Tensor x = enc.bottleneck;
  for (std::size_t i = config.depth; i-- > 0;) {
    const std::string block = level_name("dec", i);
    x = ops::transconv3d(x, param(params, block + ".up.weight"), 2);
    x = ops::concat_channels(enc.skips[i], x);
    x = double_conv(config, params, block, x);
  }
  x = ops::conv3d(x, param(params, "head.weight"), param(params, "head.bias"), 0, 1);
  return ops::sigmoid(x);
}

Tensor aux_head_forward(const AuxHeadConfig& config, const ParamStore& params,
                        const Tensor& bottleneck) {
  if (bottleneck.numel() != config.input_features)
    throw DimensionError("aux head expects " + std::to_string(config.input_features) +
                         " features, bottleneck has " + std::to_string(bottleneck.numel()));
  Tensor h = ops::dense(ops::flatten(bottleneck), param(params, "aux.fc1.weight"),
                        param(params, "aux.fc1.bias"));
  h = ops::relu(h);
  h = ops::dense(h, param(params, "aux.fc2.weight"), param(params, "aux.fc2.bias"));
  return ops::softmax(h);
}

}  // namespace neurotube
