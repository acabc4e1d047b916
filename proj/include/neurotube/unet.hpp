#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "neurotube/ops.hpp"
#include "neurotube/tensor.hpp"
#include "neurotube/volume.hpp"

namespace neurotube {

/// Named parameters, iterated in name order. The order is the one the
/// optimizer and the checkpoint format rely on.
using ParamStore = std::map<std::string, Tensor>;

struct UNetConfig {
  std::size_t depth = 3;          // pooling stages
  std::size_t base_channels = 8;  // channels at level 0; doubles per level
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Dims3 input_size{32, 32, 32};
  bool use_groupnorm = false;     // per-channel group norm after each conv

  std::size_t channels_at(std::size_t level) const { return base_channels << level; }
  std::size_t bottleneck_channels() const { return channels_at(depth); }
  bool operator==(const UNetConfig&) const = default;
};

struct AuxHeadConfig {
  std::size_t hidden_units = 256;
  std::size_t num_classes = 10;
  std::size_t input_features = 0;  // flattened bottleneck length
  bool operator==(const AuxHeadConfig&) const = default;
};

/// Per-level pooling windows for an input of `dims`. x and y always pool by
/// 2; z pools by 2 only while the pooled extent stays >= 2. Throws
/// DimensionError when an extent is not divisible where it must pool.
std::vector<ops::Window3> pooling_plan(const UNetConfig& config, const Dims3& dims);

/// Bottleneck shape [C, D, H, W] for an input of `dims`.
Shape bottleneck_shape(const UNetConfig& config, const Dims3& dims);

/// Aux head sized for the encoder bottleneck at `aux_input`.
AuxHeadConfig make_aux_config(const UNetConfig& config, const Dims3& aux_input,
                              std::size_t num_classes, std::size_t hidden_units = 256);

/// True for encoder and bottleneck parameters (the transferable part).
bool is_encoder_param(const std::string& name);
bool is_aux_param(const std::string& name);

/// He-uniform weights and zero biases. Every tensor draws from its own
/// stream derived from (seed, name), so the init of one part never depends
/// on which other parts exist.
ParamStore init_unet_params(const UNetConfig& config, std::uint64_t seed);
ParamStore init_aux_params(const AuxHeadConfig& config, std::uint64_t seed);

std::size_t parameter_count(const ParamStore& params);

/// [1, Z, Y, X] view of a volume (same flat order) and back.
Tensor volume_to_tensor(const Volume& volume, bool requires_grad = false);
Volume tensor_to_volume(const Tensor& t, VolumeKind kind = VolumeKind::prediction);

struct EncoderOutput {
  Tensor bottleneck;
  std::vector<Tensor> skips;  // one per level, pre-pooling
  std::vector<ops::Window3> plan;
};

EncoderOutput encoder_pass(const UNetConfig& config, const ParamStore& params, const Tensor& input);

/// Bottleneck activation [base * 2^depth, ...].
Tensor encoder_forward(const UNetConfig& config, const ParamStore& params, const Tensor& input);

/// Probability volume [1, Z, Y, X]. Requires isotropic pooling on every
/// level (all extents divisible by 2^depth).
Tensor unet_forward(const UNetConfig& config, const ParamStore& params, const Tensor& input);

/// flatten -> dense -> relu -> dense -> softmax.
Tensor aux_head_forward(const AuxHeadConfig& config, const ParamStore& params,
                        const Tensor& bottleneck);

}  // namespace neurotube
