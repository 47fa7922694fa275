#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "tcoh/error.hpp"
#include "tcoh/nn.hpp"

using namespace tcoh;
using namespace tcoh::nn;

namespace {

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);
  return v;
}

// Central differences of loss() with respect to every entry of `values`.
std::vector<double> numeric_grad(std::vector<double>& values, const std::function<double()>& loss, double h) {
  std::vector<double> g(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double up = loss();
    values[i] = keep - h;
    const double dn = loss();
    values[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double weighted_sum(const Tensor& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
  return s;
}

}  // namespace

TEST_CASE("linear forward examples") {
  Rng rng(1);
  LinearLayer id = LinearLayer::create(3, 3, rng);
  id.weight = linalg::Matrix::identity(3);
  id.bias = {0, 0, 0};
  const Tensor x = Tensor::vector({1.5, -2.0, 0.25});
  CHECK(linear_forward(id, x) == x);

  LinearLayer one = LinearLayer::create(2, 1, rng);
  one.weight = linalg::Matrix{{1, 1}};
  one.bias = {1};
  CHECK(linear_forward(one, Tensor::vector({2, 3}))[0] == 6.0);

  CHECK_THROWS_AS(linear_forward(one, Tensor::vector({1, 2, 3})), DimensionError);
}

TEST_CASE("linear forward matches dot-product loop") {
  std::mt19937_64 gen(2);
  Rng rng(2);
  LinearLayer layer = LinearLayer::create(7, 4, rng);
  layer.bias = random_values(4, gen);
  const Tensor x = Tensor::vector(random_values(7, gen));
  const Tensor y = linear_forward(layer, x);
  for (std::size_t o = 0; o < 4; ++o) {
    double s = layer.bias[o];
    for (std::size_t i = 0; i < 7; ++i) s += layer.weight(o, i) * x[i];
    CHECK(std::abs(y[o] - s) < 1e-12);
  }
}

TEST_CASE("linear backward examples") {
  Rng rng(3);
  LinearLayer layer = LinearLayer::create(3, 3, rng);
  const Tensor x = Tensor::vector({1, 2, 3});
  const LinearBackward zero = linear_backward(layer, x, Tensor::vector({0, 0, 0}));
  for (double v : zero.grad_x.data()) CHECK(v == 0.0);
  for (double v : zero.grads.weight.data()) CHECK(v == 0.0);
  for (double v : zero.grads.bias) CHECK(v == 0.0);

  layer.weight = linalg::Matrix::identity(3);
  const Tensor gy = Tensor::vector({0.5, -1, 2});
  const LinearBackward id = linear_backward(layer, x, gy);
  CHECK(id.grad_x == gy);
  for (std::size_t o = 0; o < 3; ++o) {
    CHECK(id.grads.bias[o] == gy[o]);
    for (std::size_t i = 0; i < 3; ++i) CHECK(id.grads.weight(o, i) == gy[o] * x[i]);
  }
  CHECK_THROWS_AS(linear_backward(layer, x, Tensor::vector({1, 2})), DimensionError);
}

TEST_CASE("linear backward matches finite differences") {
  std::mt19937_64 gen(4);
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t in = trial == 0 ? 3 : 1 + gen() % 10, out = trial == 0 ? 5 : 1 + gen() % 10;
    LinearLayer layer = LinearLayer::create(in, out, rng);
    layer.bias = random_values(out, gen);
    Tensor x = Tensor::vector(random_values(in, gen));
    const auto r = random_values(out, gen);
    auto loss = [&] { return weighted_sum(linear_forward(layer, x), r); };
    const LinearBackward bw = linear_backward(layer, x, Tensor::vector(r));
    CHECK(rel_err(bw.grad_x.data(), numeric_grad(x.data(), loss, 1e-5)) < 1e-6);
    CHECK(rel_err(bw.grads.weight.data(), numeric_grad(layer.weight.data(), loss, 1e-5)) < 1e-6);
    CHECK(rel_err(bw.grads.bias, numeric_grad(layer.bias, loss, 1e-5)) < 1e-6);
  }
}

TEST_CASE("conv forward examples") {
  Rng rng(5);
  Conv2dLayer unit = Conv2dLayer::create(1, 1, 1, Padding::valid, rng);
  unit.kernels.data() = {1.0};
  unit.bias = {0.0};
  std::mt19937_64 gen(5);
  const Tensor x({1, 4, 5}, random_values(20, gen));
  CHECK(conv2d_forward(unit, x) == x);

  Conv2dLayer avg = Conv2dLayer::create(1, 1, 3, Padding::valid, rng);
  for (double& v : avg.kernels.data()) v = 1.0 / 9.0;
  avg.bias = {0.0};
  const Tensor flat({1, 6, 6}, 0.7);
  const Tensor y = conv2d_forward(avg, flat);
  CHECK(y.shape() == Tensor::Shape{1, 4, 4});
  for (double v : y.data()) CHECK(std::abs(v - 0.7) < 1e-15);
}

TEST_CASE("conv forward matches the naive loop") {
  std::mt19937_64 gen(6);
  Rng rng(6);
  for (Padding pad : {Padding::valid, Padding::same}) {
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t cin = 2, cout = 1 + trial % 3, k = 3 + 2 * (trial % 2), h = 7 + trial, w = 6 + trial;
      Conv2dLayer layer = Conv2dLayer::create(cin, cout, k, pad, rng);
      layer.bias = random_values(cout, gen);
      const Tensor x({cin, h, w}, random_values(cin * h * w, gen));
      const Tensor y = conv2d_forward(layer, x);
      const std::size_t p = pad == Padding::same ? k / 2 : 0;
      const auto expected = oracle::naive_conv(x.data(), cin, h, w, layer.kernels.data(), layer.bias, cout, k, p);
      REQUIRE(y.size() == expected.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - expected[i]));
      CHECK(worst < 1e-12);
      if (pad == Padding::same) {
        CHECK(y.shape() == Tensor::Shape{cout, h, w});
      } else {
        CHECK(y.shape() == Tensor::Shape{cout, h - k + 1, w - k + 1});
      }
    }
  }
}

TEST_CASE("conv shape errors") {
  Rng rng(7);
  const Conv2dLayer layer = Conv2dLayer::create(2, 3, 5, Padding::valid, rng);
  CHECK_THROWS_AS(conv2d_forward(layer, Tensor({1, 8, 8})), DimensionError);
  CHECK_THROWS_AS(conv2d_forward(layer, Tensor({2, 4, 8})), DimensionError);
  CHECK_THROWS_AS(Conv2dLayer::create(1, 1, 4, Padding::same, rng), Error);
  const Tensor x({2, 6, 6}, 1.0);
  CHECK_THROWS_AS(conv2d_backward(layer, x, Tensor({3, 3, 3})), DimensionError);
}

TEST_CASE("conv backward examples") {
  Rng rng(8);
  Conv2dLayer layer = Conv2dLayer::create(2, 3, 3, Padding::same, rng);
  const Tensor x({2, 5, 5}, 0.3);
  const Conv2dBackward zero = conv2d_backward(layer, x, Tensor({3, 5, 5}));
  for (double v : zero.grad_x.data()) CHECK(v == 0.0);
  for (double v : zero.grads.kernels.data()) CHECK(v == 0.0);
  for (double v : zero.grads.bias) CHECK(v == 0.0);
  CHECK(zero.grads.kernels.shape() == layer.kernels.shape());

  Conv2dLayer unit = Conv2dLayer::create(1, 1, 1, Padding::valid, rng);
  unit.kernels.data() = {1.0};
  std::mt19937_64 gen(8);
  const Tensor gy({1, 4, 4}, random_values(16, gen));
  CHECK(conv2d_backward(unit, Tensor({1, 4, 4}, 1.0), gy).grad_x == gy);
}

TEST_CASE("conv backward matches finite differences") {
  std::mt19937_64 gen(9);
  Rng rng(9);
  for (Padding pad : {Padding::valid, Padding::same}) {
    for (int trial = 0; trial < 6; ++trial) {
      const std::size_t cin = 1 + trial % 3, cout = 1 + (trial + 1) % 3, k = trial % 2 ? 3 : 1;
      const std::size_t h = k + 1 + trial % 4, w = k + 2 + trial % 3;
      Conv2dLayer layer = Conv2dLayer::create(cin, cout, k, pad, rng);
      layer.bias = random_values(cout, gen);
      Tensor x({cin, h, w}, random_values(cin * h * w, gen));
      const auto shape = layer.output_shape(x.shape());
      const auto r = random_values(shape_size(shape), gen);
      auto loss = [&] { return weighted_sum(conv2d_forward(layer, x), r); };
      const Conv2dBackward bw = conv2d_backward(layer, x, Tensor(shape, r));
      CHECK(rel_err(bw.grad_x.data(), numeric_grad(x.data(), loss, 1e-5)) < 1e-6);
      CHECK(rel_err(bw.grads.kernels.data(), numeric_grad(layer.kernels.data(), loss, 1e-5)) < 1e-6);
      CHECK(rel_err(bw.grads.bias, numeric_grad(layer.bias, loss, 1e-5)) < 1e-6);
    }
  }
}

TEST_CASE("tanh") {
  const Tensor zero = tanh_forward(Tensor::vector({0.0}));
  CHECK(zero[0] == 0.0);
  const Tensor big = tanh_forward(Tensor::vector({50.0, -50.0}));
  CHECK(big[0] == 1.0);
  CHECK(big[1] == -1.0);
  const Tensor g = tanh_backward(big, Tensor::vector({1.0, 1.0}));
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);

  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial;
    std::vector<double> xv = random_values(n, gen);
    for (double& v : xv) v *= 2.0;
    const auto r = random_values(n, gen);
    Tensor x = Tensor::vector(xv);
    auto loss = [&] { return weighted_sum(tanh_forward(x), r); };
    const Tensor analytic = tanh_backward(tanh_forward(x), Tensor::vector(r));
    CHECK(rel_err(analytic.data(), numeric_grad(x.data(), loss, 1e-5)) < 1e-8);
  }
}

TEST_CASE("sgd examples") {
  SgdConfig cfg{.learning_rate = 0.1, .momentum = 0.0, .weight_decay = 0.0};
  std::vector<double> p{1.0, -2.0}, v{0.0, 0.0};
  const std::vector<double> zeros{0.0, 0.0};
  sgd_step(p, zeros, v, cfg);
  CHECK(p == std::vector<double>{1.0, -2.0});

  std::vector<double> theta{0.0}, vel{0.0};
  sgd_step(theta, std::vector<double>{1.0}, vel, cfg);
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-15));

  std::vector<double> bad{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(sgd_step(p, bad, v, cfg), DimensionError);
}

TEST_CASE("sgd two steps with momentum and decay match the recurrence") {
  const SgdConfig cfg{.learning_rate = 0.05, .momentum = 0.9, .weight_decay = 0.1};
  std::vector<double> p{0.8}, v{0.0};
  const double g1 = 0.3, g2 = -0.7;
  sgd_step(p, std::vector<double>{g1}, v, cfg);
  sgd_step(p, std::vector<double>{g2}, v, cfg);
  double th = 0.8, vel = 0.0;
  vel = 0.9 * vel + g1 + 0.1 * th;
  th -= 0.05 * vel;
  vel = 0.9 * vel + g2 + 0.1 * th;
  th -= 0.05 * vel;
  CHECK(std::abs(p[0] - th) < 1e-12);
  CHECK(std::abs(v[0] - vel) < 1e-12);

  std::vector<double> b{0.8}, bv{0.0};
  sgd_step(b, std::vector<double>{0.0}, bv, cfg, false);
  CHECK(b[0] == 0.8);
}

TEST_CASE("layer sgd skips decay on biases") {
  Rng rng(11);
  LinearLayer layer = LinearLayer::create(2, 2, rng);
  layer.bias = {1.0, 1.0};
  const linalg::Matrix w0 = layer.weight;
  LinearGrads zero{linalg::Matrix(2, 2), {0.0, 0.0}};
  sgd_step(layer, zero, SgdConfig{.learning_rate = 0.1, .momentum = 0.0, .weight_decay = 0.5});
  CHECK(layer.bias == std::vector<double>{1.0, 1.0});
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(layer.weight.data()[i] - w0.data()[i] * 0.95) < 1e-15);
}

TEST_CASE("sgd config validation") {
  CHECK_THROWS_AS((SgdConfig{.learning_rate = 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((SgdConfig{.momentum = 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((SgdConfig{.weight_decay = -1.0}.validate()), ConfigError);
  CHECK_NOTHROW((SgdConfig{}.validate()));
}

TEST_CASE("init is bounded and seeded") {
  Rng a(12), b(12);
  const LinearLayer la = LinearLayer::create(56, 2, a), lb = LinearLayer::create(56, 2, b);
  CHECK(la == lb);
  const double bound = std::sqrt(6.0 / 58.0);
  for (double v : la.weight.data()) CHECK(std::abs(v) <= bound);
  const Conv2dLayer c = Conv2dLayer::create(2, 4, 5, Padding::same, a);
  const double cb = std::sqrt(6.0 / (2 * 25 + 4 * 25));
  for (double v : c.kernels.data()) CHECK(std::abs(v) <= cb);
}

TEST_CASE("forward passes are deterministic") {
  Rng rng(13);
  std::mt19937_64 gen(13);
  const Conv2dLayer layer = Conv2dLayer::create(3, 4, 3, Padding::same, rng);
  const Tensor x({3, 9, 9}, random_values(243, gen));
  CHECK(conv2d_forward(layer, x) == conv2d_forward(layer, x));
}
