#pragma once

#include <span>

#include "neurotube/tensor.hpp"

namespace neurotube::losses {

inline constexpr double kProbFloor = 1e-12;  // aux-task log clamp
inline constexpr double kBceClamp = 1e-7;    // segmentation log clamp

/// Ratio of a subvolume's intensity sum to that of its parent volume,
/// clamped to [0, 1]. Throws ArgumentError unless full_volume_sum > 0.
double information_weight(double subvolume_sum, double full_volume_sum);

/// weight * (-sum_i label_i * log(max(probs_i, 1e-12))). `probs` is the
/// softmax output; gradients flow back through it to the logits.
Tensor weighted_cross_entropy(std::span<const real> label, const Tensor& probs, double weight);

/// Mean over voxels of -(t log p + (1 - t) log(1 - p)), p clamped to
/// [1e-7, 1 - 1e-7]. Clamped voxels receive no gradient.
Tensor binary_cross_entropy(const Tensor& pred, std::span<const float> target);

/// Plain evaluations, no graph.
double weighted_cross_entropy_value(std::span<const real> label, std::span<const real> probs,
                                    double weight);
double binary_cross_entropy_value(std::span<const float> pred, std::span<const float> target);

}  // namespace neurotube::losses
