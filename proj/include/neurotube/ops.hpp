#pragma once

#include <cstddef>

#include "neurotube/tensor.hpp"

// Differentiable operators over channel-first tensors [C, D, H, W] with W
// the fastest-varying axis. For volumes, D is z, H is y and W is x.
namespace neurotube::ops {

/// Per-axis window (depth, height, width) for pooling and upsampling.
struct Window3 {
  std::size_t d = 2, h = 2, w = 2;
  bool operator==(const Window3&) const = default;
};

/// 3D cross-correlation. weight is [C_out, C_in, kd, kh, kw]; bias may be
/// undefined. Output spatial extent is (n + 2*padding - k) / stride + 1.
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t padding, std::size_t stride = 1);

/// Non-overlapping max pooling. Ties route the gradient to the lowest flat
/// input index in the window.
Tensor maxpool3d(const Tensor& input, std::size_t window = 2);
Tensor maxpool3d(const Tensor& input, Window3 window);

/// Transposed convolution with stride equal to the kernel size: every input
/// voxel scatters value * kernel into its own output block. weight is
/// [C_in, C_out, k, k, k].
Tensor transconv3d(const Tensor& input, const Tensor& weight, std::size_t stride = 2);

enum class Activation { relu, sigmoid, softmax_lastdim };

Tensor activation(const Tensor& input, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }
inline Tensor softmax(const Tensor& x) { return activation(x, Activation::softmax_lastdim); }

/// weight [G, F] times input [F] plus bias [G].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Concatenates along dim 0; remaining dims must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
inline Tensor flatten(const Tensor& x) { return reshape(x, Shape{x.numel()}); }

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, real factor);
/// Scalar sum, accumulated in double.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Group normalization over [C, ...]; gamma and beta are per channel.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::size_t groups, real eps = real(1e-5));

}  // namespace neurotube::ops
