#include "tcoh/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tcoh/error.hpp"

namespace tcoh::eval {

namespace {

struct FitScore {
  Vector coef;
  double abs_error = 0.0;
  double sse = 0.0;
  double sst = 0.0;
};

FitScore fit(const Matrix& x, const Vector& y) {
  FitScore f;
  f.coef = linalg::least_squares(x, y);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double pred = f.coef.back();
    for (std::size_t j = 0; j < x.cols(); ++j) pred += f.coef[j] * x(i, j);
    f.abs_error += std::abs(pred - y[i]);
    f.sse += (pred - y[i]) * (pred - y[i]);
    f.sst += (y[i] - mean) * (y[i] - mean);
  }
  return f;
}

double r2_of(double sse, double sst) { return sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0); }

}  // namespace

AngleDecoding decode_angle(const Matrix& outputs, std::span<const double> angles) {
  if (outputs.rows() != angles.size()) throw DimensionError("decode_angle: one angle per output row is required");
  Vector s(angles.size()), c(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    s[i] = std::sin(angles[i]);
    c[i] = std::cos(angles[i]);
  }
  const FitScore fs = fit(outputs, s);
  const FitScore fc = fit(outputs, c);
  AngleDecoding d;
  d.sin_coef = fs.coef;
  d.cos_coef = fc.coef;
  d.sin_abs_error = fs.abs_error;
  d.cos_abs_error = fc.abs_error;
  d.total_abs_error = fs.abs_error + fc.abs_error;
  d.sin_r2 = r2_of(fs.sse, fs.sst);
  d.cos_r2 = r2_of(fc.sse, fc.sst);
  d.r2 = r2_of(fs.sse + fc.sse, fs.sst + fc.sst);
  return d;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson: need two equal series of length >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> intensity_centroid(const Tensor& y) {
  if (y.rank() != 3) throw DimensionError("intensity_centroid: expected a C x H x W map, got " + shape_string(y.shape()));
  const std::size_t ch = y.extent(0), h = y.extent(1), w = y.extent(2);
  const std::size_t plane = h * w;
  std::vector<double> intensity(plane, 0.0);
  std::vector<double> buf(plane);
  for (std::size_t c = 0; c < ch; ++c) {
    const double* p = y.data().data() + c * plane;
    std::copy(p, p + plane, buf.begin());
    auto mid = buf.begin() + static_cast<std::ptrdiff_t>(plane / 2);
    std::nth_element(buf.begin(), mid, buf.end());
    double median = *mid;
    if (plane % 2 == 0) median = 0.5 * (median + *std::max_element(buf.begin(), mid));
    for (std::size_t i = 0; i < plane; ++i) intensity[i] += std::abs(p[i] - median);
  }
  double total = 0.0, row = 0.0, col = 0.0;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double v = intensity[r * w + c];
      total += v;
      row += v * static_cast<double>(r);
      col += v * static_cast<double>(c);
    }
  if (total == 0.0) return {(static_cast<double>(h) - 1.0) / 2.0, (static_cast<double>(w) - 1.0) / 2.0};
  return {row / total, col / total};
}

Localization localize(std::span<const std::vector<double>> predicted, std::span<const std::vector<double>> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("localize: prediction and ground-truth counts differ");
  std::vector<double> pr, pc, tr, tc;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != 2 || truth[i].size() != 2) throw DimensionError("localize: centroids are (row, col)");
    pr.push_back(predicted[i][0]);
    pc.push_back(predicted[i][1]);
    tr.push_back(truth[i][0]);
    tc.push_back(truth[i][1]);
  }
  Localization loc;
  auto score = [&](const std::vector<double>& a, const std::vector<double>& b, const char* axis) {
    const double r = pearson(a, b);
    if (std::isnan(r)) {
      loc.warnings.push_back(std::string("correlation undefined for constant ") + axis + " series; reported as 0");
      return 0.0;
    }
    return r;
  };
  loc.row_correlation = score(pr, tr, "row");
  loc.col_correlation = score(pc, tc, "column");
  loc.correlation = 0.5 * (loc.row_correlation + loc.col_correlation);
  return loc;
}

Matrix procrustes_rotation(const Matrix& source, const Matrix& target) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw DimensionError("procrustes_rotation: embeddings differ in shape");
  }
  // Polar factor of M = source^T target: M (M^T M)^{-1/2}.
  const Matrix m = source.transpose() * target;
  return m * linalg::inv_sqrt_sym((m.transpose() * m).symmetrized());
}

Matrix stack_outputs(const std::vector<Tensor>& outputs) {
  if (outputs.empty()) return {};
  Matrix m(outputs.size(), outputs.front().size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].size() != m.cols()) throw DimensionError("stack_outputs: outputs differ in size");
    std::copy(outputs[i].data().begin(), outputs[i].data().end(), m.row(i).begin());
  }
  return m;
}

std::vector<Tensor> network_outputs(const Network& net, const data::SequenceDataset& ds) {
  std::vector<Tensor> out;
  for (const auto& s : ds.sequences)
    for (const auto& f : s.frames) out.push_back(net.forward(f));
  return out;
}

AngleDecoding evaluate_angle(const Network& net, const data::SequenceDataset& ds) {
  if (!ds.has_ground_truth()) throw ValueError("decode-angle needs ground-truth angles");
  std::vector<double> angles;
  for (const auto& s : ds.sequences)
    for (const auto& g : s.ground_truth) {
      if (g.empty()) throw ValueError("decode-angle: empty ground-truth row");
      angles.push_back(g.front());
    }
  return decode_angle(stack_outputs(network_outputs(net, ds)), angles);
}

Localization evaluate_localization(const Network& net, const data::SequenceDataset& ds) {
  if (!ds.has_ground_truth()) throw ValueError("localize needs ground-truth centroids");
  std::vector<std::vector<double>> pred, truth;
  for (const auto& s : ds.sequences)
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      pred.push_back(intensity_centroid(net.forward(s.frames[i])));
      truth.push_back(s.ground_truth[i]);
    }
  return localize(pred, truth);
}

}  // namespace tcoh::eval
