#include "tcoh/ul.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <sstream>

#include "tcoh/error.hpp"

namespace tcoh::ul {

namespace {

Matrix ridged(const Matrix& m, double ridge) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += ridge;
  return out;
}

// Cholesky of a ridged covariance; a failure here means the recursion lost
// positive semi-definiteness, which only non-finite inputs can cause.
Matrix factor_ridged(const Matrix& m, double ridge, const char* which) {
  try {
    return linalg::cholesky(ridged(m, ridge));
  } catch (const FactorizationError& e) {
    std::ostringstream os;
    os << "UL layer: " << which << " + ridge is not positive definite (pivot " << e.pivot() << ")";
    throw DegenerateError(os.str());
  }
}

void require_finite(std::span<const double> y, const char* what) {
  for (double v : y) {
    if (!std::isfinite(v)) throw ValueError(std::string(what) + ": non-finite output value");
  }
}

// (1 - rate) * m + rate * e e^T, written entrywise so the result stays exactly
// symmetric.
void ema_outer(Matrix& m, std::span<const double> e, double rate) {
  const std::size_t d = e.size();
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      const double v = (1.0 - rate) * m(a, b) + rate * (e[a] * e[b]);
      m(a, b) = v;
      m(b, a) = v;
    }
  }
}

}  // namespace

void UlHyper::validate() const {
  std::ostringstream os;
  if (!(mu > 0.0 && mu <= 1.0)) os << "mu must lie in (0, 1]; ";
  if (!(eps > 0.0 && eps < 1.0)) os << "eps must lie in (0, 1); ";
  if (!(eps < mu)) os << "eps must be smaller than mu; ";
  if (!(ridge > 0.0) || !std::isfinite(ridge)) os << "ridge must be positive; ";
  if (!(combine_weight >= 0.0) || !std::isfinite(combine_weight)) os << "combine_weight must be non-negative; ";
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) os << "init_scale must be positive; ";
  const std::string msg = os.str();
  if (!msg.empty()) throw ConfigError("UL hyperparameters: " + msg.substr(0, msg.size() - 2));
}

UlStateVec UlStateVec::starting_at(std::span<const double> y_first, double scale) {
  UlStateVec s;
  s.initialized = true;
  s.y_hat.assign(y_first.begin(), y_first.end());
  s.y_bar = s.y_hat;
  s.w = Matrix::identity(y_first.size()) * scale;
  s.b = s.w;
  return s;
}

UlStateConv UlStateConv::starting_at(const Tensor& y_first, double scale, ConvCovariance mode) {
  if (y_first.rank() != 3) throw DimensionError("UlStateConv: expected a C x H x W output");
  UlStateConv s;
  s.mode = mode;
  s.initialized = true;
  s.y_hat = y_first;
  s.y_bar = y_first;
  const std::size_t c = y_first.extent(0);
  if (mode == ConvCovariance::diagonal) {
    s.w_var.assign(c, scale);
    s.b_var.assign(c, scale);
  } else {
    s.w_cov = Matrix::identity(c) * scale;
    s.b_cov = s.w_cov;
  }
  return s;
}

Vector ul_forward_vec(UlStateVec& state, std::span<const double> y, const UlHyper& h) {
  require_finite(y, "ul_forward_vec");
  if (!state.initialized) state = UlStateVec::starting_at(y, h.init_scale);
  const std::size_t d = state.y_hat.size();
  if (y.size() != d) {
    std::ostringstream os;
    os << "ul_forward_vec: output has " << y.size() << " values, state tracks " << d;
    throw DimensionError(os.str());
  }

  Vector fast_dev(d), slow_dev(d);
  for (std::size_t a = 0; a < d; ++a) {
    state.y_hat[a] += h.mu * (y[a] - state.y_hat[a]);
    state.y_bar[a] += h.eps * (y[a] - state.y_bar[a]);
    fast_dev[a] = y[a] - state.y_hat[a];
    slow_dev[a] = state.y_hat[a] - state.y_bar[a];
  }
  ema_outer(state.w, fast_dev, h.mu);
  ema_outer(state.b, slow_dev, h.eps);
  ++state.t;

  const Vector contract = linalg::cholesky_solve(factor_ridged(state.w, h.ridge, "W"), fast_dev);
  const Vector expand = linalg::cholesky_solve(factor_ridged(state.b, h.ridge, "B"), slow_dev);
  Vector grad(d);
  for (std::size_t a = 0; a < d; ++a) grad[a] = contract[a] - expand[a];
  return grad;
}

Tensor ul_forward_conv(UlStateConv& state, const Tensor& y, const UlHyper& h) {
  require_finite(y.values(), "ul_forward_conv");
  if (y.rank() != 3) throw DimensionError("ul_forward_conv: expected a C x H x W output");
  if (!state.initialized) state = UlStateConv::starting_at(y, h.init_scale, state.mode);
  require_same_shape(y, state.y_hat, "ul_forward_conv");

  const std::size_t channels = y.extent(0);
  const std::size_t plane = y.extent(1) * y.extent(2);
  const double inv_plane = 1.0 / static_cast<double>(plane);

  Tensor fast_dev(y.shape()), slow_dev(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    state.y_hat[i] += h.mu * (y[i] - state.y_hat[i]);
    state.y_bar[i] += h.eps * (y[i] - state.y_bar[i]);
    fast_dev[i] = y[i] - state.y_hat[i];
    slow_dev[i] = state.y_hat[i] - state.y_bar[i];
  }
  ++state.t;

  Tensor grad(y.shape());
  if (state.mode == ConvCovariance::diagonal) {
    for (std::size_t c = 0; c < channels; ++c) {
      double fast_ms = 0.0, slow_ms = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double f = fast_dev[c * plane + p];
        const double s = slow_dev[c * plane + p];
        fast_ms += f * f;
        slow_ms += s * s;
      }
      state.w_var[c] = (1.0 - h.mu) * state.w_var[c] + h.mu * (fast_ms * inv_plane);
      state.b_var[c] = (1.0 - h.eps) * state.b_var[c] + h.eps * (slow_ms * inv_plane);
      const double w_inv = 1.0 / (state.w_var[c] + h.ridge);
      const double b_inv = 1.0 / (state.b_var[c] + h.ridge);
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = c * plane + p;
        grad[i] = fast_dev[i] * w_inv - slow_dev[i] * b_inv;
      }
    }
    return grad;
  }

  Matrix fast_cov(channels, channels), slow_cov(channels, channels);
  Vector f(channels), s(channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      f[c] = fast_dev[c * plane + p];
      s[c] = slow_dev[c * plane + p];
    }
    for (std::size_t a = 0; a < channels; ++a)
      for (std::size_t b = 0; b < channels; ++b) {
        fast_cov(a, b) += f[a] * f[b];
        slow_cov(a, b) += s[a] * s[b];
      }
  }
  for (std::size_t a = 0; a < channels; ++a) {
    for (std::size_t b = a; b < channels; ++b) {
      const double wv = (1.0 - h.mu) * state.w_cov(a, b) + h.mu * (fast_cov(a, b) * inv_plane);
      const double bv = (1.0 - h.eps) * state.b_cov(a, b) + h.eps * (slow_cov(a, b) * inv_plane);
      state.w_cov(a, b) = state.w_cov(b, a) = wv;
      state.b_cov(a, b) = state.b_cov(b, a) = bv;
    }
  }
  const Matrix gw = factor_ridged(state.w_cov, h.ridge, "W");
  const Matrix gb = factor_ridged(state.b_cov, h.ridge, "B");
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      f[c] = fast_dev[c * plane + p];
      s[c] = slow_dev[c * plane + p];
    }
    const Vector contract = linalg::cholesky_solve(gw, f);
    const Vector expand = linalg::cholesky_solve(gb, s);
    for (std::size_t c = 0; c < channels; ++c) grad[c * plane + p] = contract[c] - expand[c];
  }
  return grad;
}

Tensor ul_backward(const Tensor& local_grad, const Tensor& upstream_grad, const UlHyper& h) {
  require_same_shape(local_grad, upstream_grad, "ul_backward");
  Tensor out = upstream_grad;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h.combine_weight * local_grad[i];
  return out;
}

std::vector<Segment> equal_segments(std::size_t n, std::size_t count) {
  if (count == 0 || count > n) throw ValueError("equal_segments: bad segment count");
  std::vector<Segment> segs;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t end = (n * (i + 1)) / count;
    segs.push_back({begin, end});
    begin = end;
  }
  return segs;
}

BatchCovariances batch_covariances(const Matrix& outputs, std::span<const Segment> segments) {
  const std::size_t n = outputs.rows();
  const std::size_t d = outputs.cols();
  if (segments.empty() || n == 0 || d == 0) throw DegenerateError("batch: no samples or segments");
  std::size_t expected = 0;
  for (const Segment& seg : segments) {
    if (seg.begin != expected || seg.end <= seg.begin) {
      throw DegenerateError("batch: segments must partition the samples in order");
    }
    if (seg.size() < 2) {
      std::ostringstream os;
      os << "batch: segment [" << seg.begin << ", " << seg.end << ") has fewer than two samples";
      throw DegenerateError(os.str());
    }
    expected = seg.end;
  }
  if (expected != n) throw DegenerateError("batch: segments do not cover every sample");

  BatchCovariances out;
  out.w = Matrix(d, d);
  out.b = Matrix(d, d);
  out.segment_means = Matrix(segments.size(), d);
  out.global_mean.assign(d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    auto mean = out.segment_means.row(i);
    for (std::size_t j = seg.begin; j < seg.end; ++j)
      for (std::size_t a = 0; a < d; ++a) mean[a] += outputs(j, a);
    for (std::size_t a = 0; a < d; ++a) {
      out.global_mean[a] += mean[a] * inv_n;
      mean[a] /= static_cast<double>(seg.size());
    }
  }
  Vector dev(d);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    const auto mean = out.segment_means.row(i);
    for (std::size_t j = seg.begin; j < seg.end; ++j) {
      for (std::size_t a = 0; a < d; ++a) dev[a] = outputs(j, a) - mean[a];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) out.w(a, b) += dev[a] * dev[b] * inv_n;
    }
    const double weight = static_cast<double>(seg.size()) * inv_n;
    for (std::size_t a = 0; a < d; ++a) dev[a] = mean[a] - out.global_mean[a];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) out.b(a, b) += weight * dev[a] * dev[b];
  }
  out.w = out.w.symmetrized();
  out.b = out.b.symmetrized();
  return out;
}

namespace {

using Wide = long double;

// log det of a symmetric positive-definite matrix held row-major in `a`;
// returns NaN on a non-positive pivot.
Wide wide_log_det(std::vector<Wide> a, std::size_t d) {
  Wide sum = 0;
  for (std::size_t j = 0; j < d; ++j) {
    Wide diag = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
    if (!(diag > 0)) return std::numeric_limits<Wide>::quiet_NaN();
    const Wide g = std::sqrt(diag);
    a[j * d + j] = g;
    sum += 2 * std::log(g);
    for (std::size_t i = j + 1; i < d; ++i) {
      Wide v = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = v / g;
    }
  }
  return sum;
}

}  // namespace

// Accumulated and factored in long double throughout.
double batch_objective(const Matrix& outputs, std::span<const Segment> segments, double ridge) {
  batch_covariances(outputs, segments);  // validates the partition
  const std::size_t n = outputs.rows(), d = outputs.cols();
  std::vector<Wide> means(segments.size() * d, 0), global(d, 0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j = segments[i].begin; j < segments[i].end; ++j)
      for (std::size_t a = 0; a < d; ++a) means[i * d + a] += outputs(j, a);
    for (std::size_t a = 0; a < d; ++a) {
      global[a] += means[i * d + a] / static_cast<Wide>(n);
      means[i * d + a] /= static_cast<Wide>(segments[i].size());
    }
  }
  std::vector<Wide> w(d * d, 0), b(d * d, 0), dev(d);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j = segments[i].begin; j < segments[i].end; ++j) {
      for (std::size_t a = 0; a < d; ++a) dev[a] = outputs(j, a) - means[i * d + a];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t c = 0; c < d; ++c) w[a * d + c] += dev[a] * dev[c] / static_cast<Wide>(n);
    }
    const Wide weight = static_cast<Wide>(segments[i].size()) / static_cast<Wide>(n);
    for (std::size_t a = 0; a < d; ++a) dev[a] = means[i * d + a] - global[a];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t c = 0; c < d; ++c) b[a * d + c] += weight * dev[a] * dev[c];
  }
  for (std::size_t a = 0; a < d; ++a) {
    w[a * d + a] += ridge;
    b[a * d + a] += ridge;
  }
  const Wide j = (wide_log_det(std::move(w), d) - wide_log_det(std::move(b), d)) / 2;
  if (std::isnan(static_cast<double>(j))) {
    throw DegenerateError("batch_objective: ridged covariance is not positive definite");
  }
  return static_cast<double>(j);
}

Matrix batch_gradient(const Matrix& outputs, std::span<const Segment> segments, double ridge) {
  const BatchCovariances cov = batch_covariances(outputs, segments);
  const std::size_t d = outputs.cols();
  const Matrix gw = factor_ridged(cov.w, ridge, "W");
  const Matrix gb = factor_ridged(cov.b, ridge, "B");
  const double inv_n = 1.0 / static_cast<double>(outputs.rows());

  Matrix grad(outputs.rows(), d);
  Vector dev(d);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto mean = cov.segment_means.row(i);
    for (std::size_t a = 0; a < d; ++a) dev[a] = mean[a] - cov.global_mean[a];
    const Vector expand = linalg::cholesky_solve(gb, dev);
    for (std::size_t j = segments[i].begin; j < segments[i].end; ++j) {
      Vector fast(d);
      for (std::size_t a = 0; a < d; ++a) fast[a] = outputs(j, a) - mean[a];
      const Vector contract = linalg::cholesky_solve(gw, fast);
      for (std::size_t a = 0; a < d; ++a) grad(j, a) = (contract[a] - expand[a]) * inv_n;
    }
  }
  return grad;
}

double scheduled_mu(double mu_top, std::size_t depth_from_top) {
  double mu = mu_top;
  for (std::size_t i = 0; i < depth_from_top && mu < 1.0; ++i) mu *= 2.0;
  return std::min(mu, 1.0);
}

}  // namespace tcoh::ul
