#pragma once

// Central finite-difference checks of every analytic gradient in the library.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tcoh::gradcheck {

/// ||a - b|| / max(||a||, ||b||), or 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

struct Options {
  std::uint64_t seed = 1;
  std::size_t instances = 50;
  std::size_t max_dim = 4;     // output dimension of the batch-objective suite
  std::size_t max_samples = 20;
  double tolerance = 1e-5;
  // Suite whose analytic gradient is perturbed before comparison (harness
  // self-test); empty for none.
  std::string corrupt;
};

/// Names of every suite, in run order.
std::vector<std::string> suite_names();

SuiteResult check_linear(const Options& opts);
SuiteResult check_conv2d(const Options& opts, bool same_padding);
SuiteResult check_tanh(const Options& opts);
SuiteResult check_batch_gradient(const Options& opts);

std::vector<SuiteResult> run_all(const Options& opts);

}  // namespace tcoh::gradcheck
