#include "tcoh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "tcoh/nn.hpp"
#include "tcoh/rng.hpp"
#include "tcoh/ul.hpp"

namespace tcoh::gradcheck {

namespace {

constexpr double kLayerStep = 1e-5;
constexpr double kBatchStep = 1e-6;

// Central differences of f over every entry of `x` (restored afterwards).
std::vector<double> numeric_gradient(std::vector<double>& x, const std::function<double()>& f, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double weighted_sum(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

Tensor random_tensor(Tensor::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void maybe_corrupt(const Options& opts, const std::string& suite, std::vector<double>& g) {
  if (opts.corrupt != suite || g.empty()) return;
  double scale = 0.0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  g[0] += 1e-2 * (scale > 0.0 ? scale : 1.0);
}

std::size_t dim_in(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

// Layer suites run a tighter tolerance than the batch objective.
constexpr double kLayerTolerance = 1e-6;

double layer_tolerance(const Options& opts) { return std::min(opts.tolerance, kLayerTolerance); }

}  // namespace

double relative_error(std::span<const double> a, std::span<const double> b) {
  const double na = linalg::norm2(a), nb = linalg::norm2(b);
  const double denom = std::max(na, nb);
  if (denom == 0.0) return 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(diff) / denom;
}

std::vector<std::string> suite_names() {
  return {"linear", "conv2d_valid", "conv2d_same", "tanh", "batch_gradient"};
}

SuiteResult check_linear(const Options& opts) {
  SuiteResult res{"linear", opts.instances, 0.0, layer_tolerance(opts)};
  Rng rng(mix_seed(opts.seed, 101));
  for (std::size_t k = 0; k < opts.instances; ++k) {
    const std::size_t in = dim_in(rng, 1, 10), out = dim_in(rng, 1, 10);
    nn::LinearLayer layer = nn::LinearLayer::create(in, out, rng);
    for (double& b : layer.bias) b = rng.uniform(-1.0, 1.0);
    Tensor x = random_tensor({in}, rng);
    const Tensor r = random_tensor({out}, rng);
    const nn::LinearBackward back = nn::linear_backward(layer, x, r);
    auto loss = [&] { return weighted_sum(nn::linear_forward(layer, x), r); };

    std::vector<double> analytic = back.grad_x.data();
    analytic.insert(analytic.end(), back.grads.weight.data().begin(), back.grads.weight.data().end());
    analytic.insert(analytic.end(), back.grads.bias.begin(), back.grads.bias.end());
    std::vector<double> numeric = numeric_gradient(x.data(), loss, kLayerStep);
    auto nw = numeric_gradient(layer.weight.data(), loss, kLayerStep);
    auto nb = numeric_gradient(layer.bias, loss, kLayerStep);
    numeric.insert(numeric.end(), nw.begin(), nw.end());
    numeric.insert(numeric.end(), nb.begin(), nb.end());
    maybe_corrupt(opts, res.name, analytic);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric));
  }
  return res;
}

SuiteResult check_conv2d(const Options& opts, bool same_padding) {
  SuiteResult res{same_padding ? "conv2d_same" : "conv2d_valid", opts.instances, 0.0, layer_tolerance(opts)};
  Rng rng(mix_seed(opts.seed, same_padding ? 103 : 102));
  for (std::size_t k = 0; k < opts.instances; ++k) {
    const std::size_t cin = dim_in(rng, 1, 3), cout = dim_in(rng, 1, 3);
    const std::size_t ks = same_padding ? 2 * dim_in(rng, 0, 2) + 1 : dim_in(rng, 1, 4);
    const std::size_t h = dim_in(rng, ks, 8), w = dim_in(rng, ks, 8);
    nn::Conv2dLayer layer =
        nn::Conv2dLayer::create(cin, cout, ks, same_padding ? nn::Padding::same : nn::Padding::valid, rng);
    for (double& b : layer.bias) b = rng.uniform(-1.0, 1.0);
    Tensor x = random_tensor({cin, h, w}, rng);
    const Tensor r = random_tensor(layer.output_shape(x.shape()), rng);
    const nn::Conv2dBackward back = nn::conv2d_backward(layer, x, r);
    auto loss = [&] { return weighted_sum(nn::conv2d_forward(layer, x), r); };

    std::vector<double> analytic = back.grad_x.data();
    analytic.insert(analytic.end(), back.grads.kernels.data().begin(), back.grads.kernels.data().end());
    analytic.insert(analytic.end(), back.grads.bias.begin(), back.grads.bias.end());
    std::vector<double> numeric = numeric_gradient(x.data(), loss, kLayerStep);
    auto nk = numeric_gradient(layer.kernels.data(), loss, kLayerStep);
    auto nb = numeric_gradient(layer.bias, loss, kLayerStep);
    numeric.insert(numeric.end(), nk.begin(), nk.end());
    numeric.insert(numeric.end(), nb.begin(), nb.end());
    maybe_corrupt(opts, res.name, analytic);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric));
  }
  return res;
}

SuiteResult check_tanh(const Options& opts) {
  SuiteResult res{"tanh", opts.instances, 0.0, layer_tolerance(opts)};
  Rng rng(mix_seed(opts.seed, 104));
  for (std::size_t k = 0; k < opts.instances; ++k) {
    Tensor x = random_tensor({dim_in(rng, 1, 10)}, rng, -3.0, 3.0);
    const Tensor r = random_tensor(x.shape(), rng);
    std::vector<double> analytic = nn::tanh_backward(nn::tanh_forward(x), r).data();
    auto loss = [&] { return weighted_sum(nn::tanh_forward(x), r); };
    const std::vector<double> numeric = numeric_gradient(x.data(), loss, kLayerStep);
    maybe_corrupt(opts, res.name, analytic);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric));
  }
  return res;
}

SuiteResult check_batch_gradient(const Options& opts) {
  SuiteResult res{"batch_gradient", opts.instances, 0.0, opts.tolerance};
  Rng rng(mix_seed(opts.seed, 105));
  const std::size_t max_dim = std::max<std::size_t>(opts.max_dim, 1);
  const std::size_t max_n = std::max<std::size_t>(opts.max_samples, 4);
  for (std::size_t k = 0; k < opts.instances; ++k) {
    const std::size_t d = dim_in(rng, 1, max_dim);
    const std::size_t n = dim_in(rng, 4, max_n);
    const std::size_t segs = dim_in(rng, 2, n / 2);
    const auto segments = ul::equal_segments(n, segs);
    linalg::Matrix y(n, d);
    for (double& v : y.data()) v = rng.normal();
    std::vector<double> analytic = ul::batch_gradient(y, segments).data();
    auto loss = [&] { return ul::batch_objective(y, segments); };
    const std::vector<double> numeric = numeric_gradient(y.data(), loss, kBatchStep);
    maybe_corrupt(opts, res.name, analytic);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric));
  }
  return res;
}

std::vector<SuiteResult> run_all(const Options& opts) {
  return {check_linear(opts), check_conv2d(opts, false), check_conv2d(opts, true), check_tanh(opts),
          check_batch_gradient(opts)};
}

}  // namespace tcoh::gradcheck
