#pragma once

// An ordered stack of regular layers, each optionally paired with a UL layer
// that watches its output.

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "tcoh/nn.hpp"
#include "tcoh/tensor.hpp"
#include "tcoh/ul.hpp"

namespace tcoh {

struct TanhLayer {
  friend bool operator==(const TanhLayer&, const TanhLayer&) = default;
};

using Layer = std::variant<nn::LinearLayer, nn::Conv2dLayer, TanhLayer>;

struct UlAttachment {
  ul::UlHyper hyper;
  std::variant<ul::UlStateVec, ul::UlStateConv> state;

  /// Clears the running statistics; the next frame re-initializes them.
  void reset();

  friend bool operator==(const UlAttachment&, const UlAttachment&) = default;
};

struct Stage {
  Layer layer;
  std::optional<UlAttachment> ul;
  Tensor::Shape output_shape;

  friend bool operator==(const Stage&, const Stage&) = default;
};

class Network {
 public:
  Network() = default;
  explicit Network(Tensor::Shape input_shape);

  const Tensor::Shape& input_shape() const noexcept { return input_shape_; }
  const Tensor::Shape& output_shape() const;

  /// Appends a layer; throws DimensionError when it cannot consume the current
  /// output shape. Linear layers flatten their input.
  void add(Layer layer);
  void add_linear(std::size_t out, Rng& rng);
  void add_conv2d(std::size_t out_channels, std::size_t kernel_size, nn::Padding padding, Rng& rng);
  void add_tanh();

  /// Attaches a UL layer to the output of stage `index`. Vector outputs get the
  /// fully connected variant, C x H x W outputs the convolutional one.
  void attach_ul(std::size_t index, const ul::UlHyper& hyper,
                 ul::ConvCovariance mode = ul::ConvCovariance::diagonal);

  std::vector<Stage>& stages() noexcept { return stages_; }
  const std::vector<Stage>& stages() const noexcept { return stages_; }
  std::size_t ul_count() const;

  /// Inference pass; UL statistics are not touched.
  Tensor forward(const Tensor& x) const;

  void reset_ul_state();
  bool parameters_finite() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  Tensor::Shape input_shape_;
  std::vector<Stage> stages_;
};

Tensor forward_layer(const Layer& layer, const Tensor& x);
Tensor::Shape layer_output_shape(const Layer& layer, const Tensor::Shape& input);

}  // namespace tcoh
