#include "tcoh/network.hpp"

#include <type_traits>

#include "tcoh/error.hpp"

namespace tcoh {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

void UlAttachment::reset() {
  std::visit(Overloaded{[](ul::UlStateVec& s) { s = ul::UlStateVec{}; },
                        [](ul::UlStateConv& s) {
                          const ul::ConvCovariance mode = s.mode;
                          s = ul::UlStateConv{};
                          s.mode = mode;
                        }},
             state);
}

Tensor forward_layer(const Layer& layer, const Tensor& x) {
  return std::visit(Overloaded{[&](const nn::LinearLayer& l) { return nn::linear_forward(l, x); },
                               [&](const nn::Conv2dLayer& l) { return nn::conv2d_forward(l, x); },
                               [&](const TanhLayer&) { return nn::tanh_forward(x); }},
                    layer);
}

Tensor::Shape layer_output_shape(const Layer& layer, const Tensor::Shape& input) {
  return std::visit(Overloaded{[&](const nn::LinearLayer& l) -> Tensor::Shape {
                                 if (shape_size(input) != l.in()) {
                                   throw DimensionError("linear layer expects " + std::to_string(l.in()) +
                                                        " inputs, previous output is " + shape_string(input));
                                 }
                                 return {l.out()};
                               },
                               [&](const nn::Conv2dLayer& l) { return l.output_shape(input); },
                               [&](const TanhLayer&) { return input; }},
                    layer);
}

Network::Network(Tensor::Shape input_shape) : input_shape_(std::move(input_shape)) {
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw DimensionError("Network: input shape must be non-empty");
  }
}

const Tensor::Shape& Network::output_shape() const {
  return stages_.empty() ? input_shape_ : stages_.back().output_shape;
}

void Network::add(Layer layer) {
  Tensor::Shape out = layer_output_shape(layer, output_shape());
  stages_.push_back(Stage{std::move(layer), std::nullopt, std::move(out)});
}

void Network::add_linear(std::size_t out, Rng& rng) {
  add(nn::LinearLayer::create(shape_size(output_shape()), out, rng));
}

void Network::add_conv2d(std::size_t out_channels, std::size_t kernel_size, nn::Padding padding, Rng& rng) {
  const Tensor::Shape& in = output_shape();
  if (in.size() != 3) throw DimensionError("conv2d layer needs a C x H x W input, got " + shape_string(in));
  add(nn::Conv2dLayer::create(in[0], out_channels, kernel_size, padding, rng));
}

void Network::add_tanh() { add(TanhLayer{}); }

void Network::attach_ul(std::size_t index, const ul::UlHyper& hyper, ul::ConvCovariance mode) {
  if (index >= stages_.size()) throw DimensionError("attach_ul: no stage " + std::to_string(index));
  hyper.validate();
  Stage& stage = stages_[index];
  if (stage.output_shape.size() == 1) {
    stage.ul = UlAttachment{hyper, ul::UlStateVec{}};
  } else if (stage.output_shape.size() == 3) {
    ul::UlStateConv state;
    state.mode = mode;
    stage.ul = UlAttachment{hyper, std::move(state)};
  } else {
    throw DimensionError("attach_ul: output " + shape_string(stage.output_shape) +
                         " is neither a vector nor C x H x W");
  }
}

std::size_t Network::ul_count() const {
  std::size_t n = 0;
  for (const Stage& s : stages_) n += s.ul.has_value();
  return n;
}

Tensor Network::forward(const Tensor& x) const {
  if (x.shape() != input_shape_) {
    throw DimensionError("Network::forward: input " + shape_string(x.shape()) + " does not match " +
                         shape_string(input_shape_));
  }
  Tensor act = x;
  for (const Stage& s : stages_) act = forward_layer(s.layer, act);
  return act;
}

void Network::reset_ul_state() {
  for (Stage& s : stages_)
    if (s.ul) s.ul->reset();
}

bool Network::parameters_finite() const {
  for (const Stage& s : stages_) {
    const bool ok = std::visit(
        Overloaded{[](const nn::LinearLayer& l) {
                     return l.weight.all_finite() && Tensor::vector(l.bias).all_finite();
                   },
                   [](const nn::Conv2dLayer& l) {
                     return l.kernels.all_finite() && Tensor::vector(l.bias).all_finite();
                   },
                   [](const TanhLayer&) { return true; }},
        s.layer);
    if (!ok) return false;
  }
  return true;
}

}  // namespace tcoh
