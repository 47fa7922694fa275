#pragma once

// Online training with UL layers: every frame runs the regular forward pass,
// lets each UL layer update its statistics and emit a local gradient, merges
// those gradients into the backward pass, and takes one SGD step.

#include <chrono>
#include <cstddef>
#include <functional>
#include <vector>

#include "tcoh/data.hpp"
#include "tcoh/network.hpp"

namespace tcoh {

struct StepResult {
  Tensor output;
  std::vector<double> local_grad_norms;  // one per UL layer, bottom to top
};

/// Drives a Network one frame at a time. Holds a reference; the network must
/// outlive the trainer.
class OnlineTrainer {
 public:
  /// `ul_gradient_sign` multiplies every local gradient before it is combined
  /// (+1 descends the UL objective).
  OnlineTrainer(Network& net, nn::SgdConfig sgd, double ul_gradient_sign = 1.0);

  /// Clears the UL statistics; call at each sequence boundary.
  void begin_sequence();

  /// Forward regular layers, forward UL layers, backward UL layers, backward
  /// regular layers with an SGD update of every parameterized layer.
  StepResult step(const Tensor& x);

 private:
  Network& net_;
  nn::SgdConfig sgd_;
  double sign_;
};

struct MetricsRow {
  int epoch = 0;
  std::vector<double> ul_grad_norms;  // mean local-gradient norm per UL layer
  double eval_metric = 0.0;
  double seconds = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Network outputs produced while training during one epoch, one list per
/// sequence.
struct EpochTrace {
  int epoch = 0;
  std::vector<std::vector<Tensor>> outputs;
};

struct TrainOptions {
  nn::SgdConfig sgd;
  int epochs = 1;
  int first_epoch = 1;  // number given to the first epoch run (resume support)
  double ul_gradient_sign = 1.0;
  bool record_wall_clock = true;
  // Computes the eval metric after each epoch; NaN is recorded when unset.
  std::function<double(const Network&, const EpochTrace&)> evaluate;
};

/// Provides the data of each epoch (noise may be resampled per epoch).
using DataSource = std::function<data::SequenceDataset(int epoch)>;

/// Runs `epochs` epochs. Throws ValueError when the network has no UL layer or
/// the data is empty, and DivergenceError naming the epoch and frame when a
/// parameter or a UL statistic becomes non-finite.
std::vector<MetricsRow> train_online(Network& net, const DataSource& source, const TrainOptions& opts);
std::vector<MetricsRow> train_online(Network& net, const data::SequenceDataset& data, const TrainOptions& opts);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows,
                       std::size_t ul_layers, bool append = false);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace tcoh
