#pragma once

// Forward and backward kernels of the differentiable core. Each op is a pure
// function of its inputs; the tape in autodiff.hpp strings them together.

#include <cstdint>
#include <span>
#include <vector>

#include "edngtm/tensor.hpp"

namespace edngtm::ops {

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;   ///< empty unless requested
  Tensor<T> kernel;  ///< empty unless requested
  Tensor<T> bias;    ///< empty unless requested
};

/// Cross-correlation with zero "same" padding (pad = K/2). Stride 1 keeps H x W;
/// stride 2 gives ceil(H/2) x ceil(W/2).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride = 1);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, std::span<const T> grad_out,
                               int stride, bool want_input, bool want_params);

/// 2x2 stride-2 transposed convolution. Kernel is Cin x Cout x 2 x 2; output is N x Cout x 2H x 2W.
template <typename T>
Tensor<T> conv_transpose2x2(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias);

template <typename T>
Conv2dGrads<T> conv_transpose2x2_backward(const Tensor<T>& input, const Tensor<T>& kernel,
                                          std::span<const T> grad_out, bool want_input, bool want_params);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::int64_t> argmax;  ///< flat input index feeding each output element
};

/// Max pooling. Stride 1 pads so H x W is preserved (padding never wins the max);
/// any other stride uses valid windows. Ties resolve to the first row-major maximum.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input, int kernel, int stride);

template <typename T>
Tensor<T> maxpool2d_backward(const Shape& input_shape, std::span<const std::int64_t> argmax,
                             std::span<const T> grad_out);

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input);

template <typename T>
Tensor<T> upsample_nearest2x_backward(const Shape& input_shape, std::span<const T> grad_out);

/// Numerically stable logistic function.
template <typename T>
T sigmoid(T x);

template <typename T>
Tensor<T> swish(const Tensor<T>& input);

template <typename T>
Tensor<T> swish_backward(const Tensor<T>& input, std::span<const T> grad_out);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);

/// Inverse of concat_channels: splits along axis 1 using the given channel counts.
template <typename T>
std::vector<Tensor<T>> split_channels(const Shape& whole_shape, std::span<const T> whole, std::span<const int> channels);

/// Per-sample, per-channel normalization over H x W with no affine parameters.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, T eps);

template <typename T>
Tensor<T> instance_norm_backward(const Tensor<T>& input, std::span<const T> grad_out, T eps);

}  // namespace edngtm::ops
