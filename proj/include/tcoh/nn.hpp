#pragma once

// Regular layers with hand-written forward and backward passes, and the SGD
// update shared by every parameterized layer. Frames are processed one at a
// time; there is no batching.

#include <cstddef>
#include <span>

#include "tcoh/linalg.hpp"
#include "tcoh/rng.hpp"
#include "tcoh/tensor.hpp"

namespace tcoh::nn {

using linalg::Matrix;
using linalg::Vector;

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;

  /// Throws ConfigError when a field is outside its domain.
  void validate() const;
};

/// Fully connected layer y = W x + b, with momentum slots for W and b.
struct LinearLayer {
  Matrix weight;  // out x in
  Vector bias;
  Matrix weight_velocity;
  Vector bias_velocity;

  /// Uniform init in +-sqrt(6 / (in + out)); zero bias.
  static LinearLayer create(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in() const noexcept { return weight.cols(); }
  std::size_t out() const noexcept { return weight.rows(); }

  friend bool operator==(const LinearLayer&, const LinearLayer&) = default;
};

struct LinearGrads {
  Matrix weight;
  Vector bias;
};

struct LinearBackward {
  Tensor grad_x;
  LinearGrads grads;
};

Tensor linear_forward(const LinearLayer& layer, const Tensor& x);
LinearBackward linear_backward(const LinearLayer& layer, const Tensor& x, const Tensor& grad_y);

enum class Padding { valid, same };

/// Stride-1 2-D cross-correlation over C x H x W inputs.
struct Conv2dLayer {
  Tensor kernels;  // out_ch x in_ch x k x k
  Vector bias;
  Tensor kernel_velocity;
  Vector bias_velocity;
  Padding padding = Padding::valid;

  /// Uniform init in +-sqrt(6 / (fan_in + fan_out)) with fan = channels * k * k.
  /// `same` padding requires an odd kernel size.
  static Conv2dLayer create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size,
                            Padding padding, Rng& rng);

  std::size_t out_channels() const { return kernels.extent(0); }
  std::size_t in_channels() const { return kernels.extent(1); }
  std::size_t kernel_size() const { return kernels.extent(2); }

  /// Output shape for a C x H x W input; throws DimensionError when the input
  /// does not fit.
  Tensor::Shape output_shape(const Tensor::Shape& input) const;

  friend bool operator==(const Conv2dLayer&, const Conv2dLayer&) = default;
};

struct Conv2dGrads {
  Tensor kernels;
  Vector bias;
};

struct Conv2dBackward {
  Tensor grad_x;
  Conv2dGrads grads;
};

Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& x);
Conv2dBackward conv2d_backward(const Conv2dLayer& layer, const Tensor& x, const Tensor& grad_y);

Tensor tanh_forward(const Tensor& x);
/// Takes the forward output y = tanh(x); returns grad_y * (1 - y^2).
Tensor tanh_backward(const Tensor& y, const Tensor& grad_y);

/// v <- momentum * v + grad + decay * param; param <- param - lr * v.
/// `decay` selects whether weight decay applies (it does not for biases).
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const SgdConfig& cfg, bool decay = true);

void sgd_step(LinearLayer& layer, const LinearGrads& grads, const SgdConfig& cfg);
void sgd_step(Conv2dLayer& layer, const Conv2dGrads& grads, const SgdConfig& cfg);

}  // namespace tcoh::nn
