#include "tcoh/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "tcoh/error.hpp"

namespace tcoh::nn {

namespace {

struct ConvGeometry {
  std::size_t in_ch, out_ch, k, h, w, out_h, out_w, pad;
};

ConvGeometry geometry(const Conv2dLayer& layer, const Tensor& x) {
  const Tensor::Shape out = layer.output_shape(x.shape());
  const std::size_t k = layer.kernel_size();
  return {layer.in_channels(), layer.out_channels(), k, x.extent(1), x.extent(2), out[1], out[2],
          layer.padding == Padding::same ? (k - 1) / 2 : 0};
}

// Calls fn(out_row, in_row, kx, first_out_col, count) for every kernel tap
// that lands inside the input, one output row at a time. Output column ox of
// that run reads input column ox + kx - pad.
template <typename Fn>
void for_each_row_tap(const ConvGeometry& g, Fn&& fn) {
  std::vector<std::size_t> lo(g.k), count(g.k, 0);
  for (std::size_t kx = 0; kx < g.k; ++kx) {
    const long first = std::max<long>(0, static_cast<long>(g.pad) - static_cast<long>(kx));
    const long last = std::min<long>(static_cast<long>(g.out_w),
                                     static_cast<long>(g.w + g.pad) - static_cast<long>(kx));
    lo[kx] = static_cast<std::size_t>(first);
    if (last > first) count[kx] = static_cast<std::size_t>(last - first);
  }
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const long iy = static_cast<long>(oy + ky) - static_cast<long>(g.pad);
      if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
      for (std::size_t kx = 0; kx < g.k; ++kx)
        if (count[kx] > 0) fn(oy, static_cast<std::size_t>(iy), ky, kx, lo[kx], count[kx]);
    }
  }
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("sgd.learning_rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("sgd.weight_decay must be non-negative");
  }
}

LinearLayer LinearLayer::create(std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw DimensionError("LinearLayer: sizes must be positive");
  LinearLayer layer;
  layer.weight = Matrix(out, in);
  const double bound = glorot_bound(in, out);
  for (double& v : layer.weight.data()) v = rng.uniform(-bound, bound);
  layer.bias.assign(out, 0.0);
  layer.weight_velocity = Matrix(out, in);
  layer.bias_velocity.assign(out, 0.0);
  return layer;
}

Tensor linear_forward(const LinearLayer& layer, const Tensor& x) {
  if (x.size() != layer.in()) {
    std::ostringstream os;
    os << "linear_forward: input has " << x.size() << " values, layer expects " << layer.in();
    throw DimensionError(os.str());
  }
  Vector y = layer.weight * x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += layer.bias[i];
  return Tensor::vector(std::move(y));
}

LinearBackward linear_backward(const LinearLayer& layer, const Tensor& x, const Tensor& grad_y) {
  if (x.size() != layer.in() || grad_y.size() != layer.out()) {
    throw DimensionError("linear_backward: input or gradient length does not match the layer");
  }
  LinearBackward out;
  Vector gx(layer.in(), 0.0);
  for (std::size_t o = 0; o < layer.out(); ++o) {
    const double g = grad_y[o];
    const auto row = layer.weight.row(o);
    for (std::size_t i = 0; i < layer.in(); ++i) gx[i] += row[i] * g;
  }
  out.grad_x = Tensor(x.shape(), std::move(gx));
  out.grads.weight = linalg::outer(grad_y.values(), x.values());
  out.grads.bias.assign(grad_y.values().begin(), grad_y.values().end());
  return out;
}

Conv2dLayer Conv2dLayer::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size,
                                Padding padding, Rng& rng) {
  if (in_channels == 0 || out_channels == 0 || kernel_size == 0) {
    throw DimensionError("Conv2dLayer: channel counts and kernel size must be positive");
  }
  if (padding == Padding::same && kernel_size % 2 == 0) {
    throw DimensionError("Conv2dLayer: same padding needs an odd kernel size");
  }
  Conv2dLayer layer;
  layer.padding = padding;
  layer.kernels = Tensor({out_channels, in_channels, kernel_size, kernel_size});
  const std::size_t area = kernel_size * kernel_size;
  const double bound = glorot_bound(in_channels * area, out_channels * area);
  for (double& v : layer.kernels.data()) v = rng.uniform(-bound, bound);
  layer.bias.assign(out_channels, 0.0);
  layer.kernel_velocity = Tensor(layer.kernels.shape());
  layer.bias_velocity.assign(out_channels, 0.0);
  return layer;
}

Tensor::Shape Conv2dLayer::output_shape(const Tensor::Shape& input) const {
  if (input.size() != 3 || input[0] != in_channels()) {
    std::ostringstream os;
    os << "conv2d: expected a " << in_channels() << " x H x W input, got " << shape_string(input);
    throw DimensionError(os.str());
  }
  const std::size_t k = kernel_size();
  if (padding == Padding::same) return {out_channels(), input[1], input[2]};
  if (input[1] < k || input[2] < k) {
    std::ostringstream os;
    os << "conv2d: input " << shape_string(input) << " is smaller than the " << k << "x" << k << " kernel";
    throw DimensionError(os.str());
  }
  return {out_channels(), input[1] - k + 1, input[2] - k + 1};
}

Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& x) {
  const ConvGeometry g = geometry(layer, x);
  Tensor y({g.out_ch, g.out_h, g.out_w});
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t in_plane = g.h * g.w;
  const double* xd = x.data().data();
  const double* kd = layer.kernels.data().data();
  double* yd = y.data().data();
  for (std::size_t o = 0; o < g.out_ch; ++o) std::fill(yd + o * out_plane, yd + (o + 1) * out_plane, layer.bias[o]);
  for_each_row_tap(g, [&](std::size_t oy, std::size_t iy, std::size_t ky, std::size_t kx, std::size_t ox,
                          std::size_t n) {
    const std::size_t ix = ox + kx - g.pad;
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      double* dst = yd + o * out_plane + oy * g.out_w + ox;
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const double wt = kd[((o * g.in_ch + c) * g.k + ky) * g.k + kx];
        const double* src = xd + c * in_plane + iy * g.w + ix;
        for (std::size_t t = 0; t < n; ++t) dst[t] += wt * src[t];
      }
    }
  });
  return y;
}

Conv2dBackward conv2d_backward(const Conv2dLayer& layer, const Tensor& x, const Tensor& grad_y) {
  const ConvGeometry g = geometry(layer, x);
  if (grad_y.shape() != Tensor::Shape{g.out_ch, g.out_h, g.out_w}) {
    throw DimensionError("conv2d_backward: gradient shape " + shape_string(grad_y.shape()) +
                         " does not match the layer output");
  }
  Conv2dBackward out;
  out.grad_x = Tensor(x.shape());
  out.grads.kernels = Tensor(layer.kernels.shape());
  out.grads.bias.assign(g.out_ch, 0.0);
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t in_plane = g.h * g.w;
  const double* xd = x.data().data();
  const double* gd = grad_y.data().data();
  const double* kd = layer.kernels.data().data();
  double* gxd = out.grad_x.data().data();
  double* gkd = out.grads.kernels.data().data();
  for (std::size_t o = 0; o < g.out_ch; ++o) {
    double bsum = 0.0;
    for (std::size_t t = 0; t < out_plane; ++t) bsum += gd[o * out_plane + t];
    out.grads.bias[o] = bsum;
  }
  for_each_row_tap(g, [&](std::size_t oy, std::size_t iy, std::size_t ky, std::size_t kx, std::size_t ox,
                          std::size_t n) {
    const std::size_t ix = ox + kx - g.pad;
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      const double* gsrc = gd + o * out_plane + oy * g.out_w + ox;
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const std::size_t widx = ((o * g.in_ch + c) * g.k + ky) * g.k + kx;
        const double wt = kd[widx];
        const double* xsrc = xd + c * in_plane + iy * g.w + ix;
        double* gdst = gxd + c * in_plane + iy * g.w + ix;
        for (std::size_t t = 0; t < n; ++t) gdst[t] += wt * gsrc[t];
        double part[4] = {0.0, 0.0, 0.0, 0.0};
        std::size_t t = 0;
        for (; t + 4 <= n; t += 4)
          for (std::size_t l = 0; l < 4; ++l) part[l] += gsrc[t + l] * xsrc[t + l];
        for (; t < n; ++t) part[0] += gsrc[t] * xsrc[t];
        gkd[widx] += (part[0] + part[1]) + (part[2] + part[3]);
      }
    }
  });
  return out;
}

Tensor tanh_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = std::tanh(v);
  return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_y) {
  require_same_shape(y, grad_y, "tanh_backward");
  Tensor gx = grad_y;
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - y[i] * y[i];
  return gx;
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const SgdConfig& cfg, bool decay) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw DimensionError("sgd_step: parameter, gradient and velocity sizes differ");
  }
  const double wd = decay ? cfg.weight_decay : 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = cfg.momentum * velocity[i] + grads[i] + wd * params[i];
    params[i] -= cfg.learning_rate * velocity[i];
  }
}

void sgd_step(LinearLayer& layer, const LinearGrads& grads, const SgdConfig& cfg) {
  sgd_step(layer.weight.data(), grads.weight.data(), layer.weight_velocity.data(), cfg, true);
  sgd_step(layer.bias, grads.bias, layer.bias_velocity, cfg, false);
}

void sgd_step(Conv2dLayer& layer, const Conv2dGrads& grads, const SgdConfig& cfg) {
  sgd_step(layer.kernels.data(), grads.kernels.data(), layer.kernel_velocity.data(), cfg, true);
  sgd_step(layer.bias, grads.bias, layer.bias_velocity, cfg, false);
}

}  // namespace tcoh::nn
