#pragma once

// Unsupervised-learning (UL) layers. A UL layer watches the output y_t of the
// regular layer it is attached to and keeps
//
//   short-term average   yh_t = (1 - mu)  yh_{t-1} + mu  y_t
//   long-term average    yb_t = (1 - eps) yb_{t-1} + eps y_t
//   short-term cov       W_t  = (1 - mu)  W_{t-1}  + mu  (y_t - yh_t)(y_t - yh_t)^T
//   long-term cov        B_t  = (1 - eps) B_{t-1}  + eps (yh_t - yb_t)(yh_t - yb_t)^T
//
// and emits, during the forward pass, the local gradient
//
//   dJ/dy_t = (W_t + ridge I)^{-1} (y_t - yh_t) - (B_t + ridge I)^{-1} (yh_t - yb_t)
//
// of J = (log det W - log det B) / 2. The ridge is applied only when solving;
// the stored covariances follow the recursions exactly.
//
// The batch objective and its analytic gradient over segmented outputs are
// provided as the reference the online rule is derived from.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tcoh/linalg.hpp"
#include "tcoh/tensor.hpp"

namespace tcoh::ul {

using linalg::Matrix;
using linalg::Vector;

struct UlHyper {
  double mu = 0.5;
  double eps = 0.001;
  double ridge = 1e-6;
  double combine_weight = 1.0;
  // Scale of the identity used for W_0 and B_0.
  double init_scale = 1.0;

  /// Throws ConfigError unless 0 < eps < mu <= 1, eps < 1, ridge > 0,
  /// combine_weight >= 0 and init_scale > 0.
  void validate() const;

  friend bool operator==(const UlHyper&, const UlHyper&) = default;
};

/// Running statistics for a UL layer on a vector output.
struct UlStateVec {
  bool initialized = false;
  std::uint64_t t = 0;
  Vector y_hat;
  Vector y_bar;
  Matrix w;
  Matrix b;

  /// Starts a stream with yh_0 = yb_0 = y_first and W_0 = B_0 = scale * I.
  static UlStateVec starting_at(std::span<const double> y_first, double scale);

  friend bool operator==(const UlStateVec&, const UlStateVec&) = default;
};

enum class ConvCovariance { diagonal, full };

/// Running statistics for a UL layer on a C x H x W output. Averages are kept
/// per location; covariances are over channels with the spatial locations as
/// samples, either per-channel variances (diagonal) or a full C x C matrix.
struct UlStateConv {
  ConvCovariance mode = ConvCovariance::diagonal;
  bool initialized = false;
  std::uint64_t t = 0;
  Tensor y_hat;
  Tensor y_bar;
  Vector w_var;  // diagonal mode
  Vector b_var;
  Matrix w_cov;  // full mode
  Matrix b_cov;

  static UlStateConv starting_at(const Tensor& y_first, double scale, ConvCovariance mode);

  friend bool operator==(const UlStateConv&, const UlStateConv&) = default;
};

/// One forward step on a vector output. An uninitialized state starts at y_t.
/// Averages update first, then covariances, then the gradient is formed with
/// Cholesky solves. Throws DimensionError on a length mismatch and ValueError
/// on non-finite input.
Vector ul_forward_vec(UlStateVec& state, std::span<const double> y, const UlHyper& h);

/// One forward step on a C x H x W output; see UlStateConv.
Tensor ul_forward_conv(UlStateConv& state, const Tensor& y, const UlHyper& h);

/// upstream + combine_weight * local.
Tensor ul_backward(const Tensor& local_grad, const Tensor& upstream_grad, const UlHyper& h);

/// Contiguous index range [begin, end) of one segment of a batch.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Splits [0, n) into `count` nearly equal contiguous segments.
std::vector<Segment> equal_segments(std::size_t n, std::size_t count);

/// Short-term (within-segment) and long-term (between-segment) covariances of
/// a batch of outputs, one row per sample.
struct BatchCovariances {
  Matrix w;
  Matrix b;
  Matrix segment_means;  // one row per segment
  Vector global_mean;
};

/// Throws DegenerateError unless the segments partition [0, rows) in order
/// and each holds at least two samples.
BatchCovariances batch_covariances(const Matrix& outputs, std::span<const Segment> segments);

/// (log det(W + ridge I) - log det(B + ridge I)) / 2.
double batch_objective(const Matrix& outputs, std::span<const Segment> segments, double ridge = 1e-6);

/// Gradient of batch_objective with respect to every output. Row j of segment
/// i is ((W + ridge I)^{-1} (y_j - yh_i) - (B + ridge I)^{-1} (yh_i - yb))^T / N.
Matrix batch_gradient(const Matrix& outputs, std::span<const Segment> segments, double ridge = 1e-6);

/// Default per-layer short-term rate: mu_top * 2^depth_from_top, clamped to 1.
double scheduled_mu(double mu_top, std::size_t depth_from_top);

}  // namespace tcoh::ul
