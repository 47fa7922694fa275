#pragma once

// Read-outs that score learned representations: linear decoding of a rotation
// angle, centroid localization from feature maps, Pearson correlation and
// orthogonal (Procrustes) alignment of two embeddings.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcoh/data.hpp"
#include "tcoh/linalg.hpp"
#include "tcoh/network.hpp"
#include "tcoh/tensor.hpp"

namespace tcoh::eval {

using linalg::Matrix;
using linalg::Vector;

/// Linear regression from outputs to sin(angle) and cos(angle), fitted and
/// scored on the same frames.
struct AngleDecoding {
  Vector sin_coef;  // one per output dimension, then the intercept
  Vector cos_coef;
  double sin_abs_error = 0.0;  // sum over frames of |prediction - target|
  double cos_abs_error = 0.0;
  double total_abs_error = 0.0;
  double sin_r2 = 0.0;
  double cos_r2 = 0.0;
  double r2 = 0.0;  // pooled over both targets
};

/// `outputs` has one row per frame. Throws DimensionError when there are
/// fewer frames than coefficients.
AngleDecoding decode_angle(const Matrix& outputs, std::span<const double> angles);

double pearson(std::span<const double> a, std::span<const double> b);

/// Per-location intensity sum_c |y_c - median_c|, where median_c is the
/// spatial median of channel c in that frame, and its weighted centroid as
/// (row, col). A flat map yields the geometric center.
std::vector<double> intensity_centroid(const Tensor& feature_map);

struct Localization {
  double row_correlation = 0.0;
  double col_correlation = 0.0;
  double correlation = 0.0;  // mean of the two
  std::vector<std::string> warnings;
};

/// Pearson correlation of predicted against true centroids over all frames.
/// A constant coordinate series scores 0 and adds a warning.
Localization localize(std::span<const std::vector<double>> predicted, std::span<const std::vector<double>> truth);

/// Rotation/reflection Q (d x d, orthogonal) minimizing ||source Q - target||_F.
Matrix procrustes_rotation(const Matrix& source, const Matrix& target);

/// Flattened network outputs of every frame, in dataset order.
Matrix stack_outputs(const std::vector<Tensor>& outputs);
std::vector<Tensor> network_outputs(const Network& net, const data::SequenceDataset& ds);

/// Frozen-network scores against the dataset's ground truth. Both throw
/// ValueError when the dataset carries none.
AngleDecoding evaluate_angle(const Network& net, const data::SequenceDataset& ds);
Localization evaluate_localization(const Network& net, const data::SequenceDataset& ds);

}  // namespace tcoh::eval
