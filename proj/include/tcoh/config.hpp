#pragma once

// Experiment configuration (JSON). Every object rejects unknown keys so a
// misspelled hyperparameter fails loudly instead of silently using a default.
//
// {
//   "seed": 1,                       // falls back to $TCOH_SEED, then 1
//   "epochs": 20,
//   "sgd": {"learning_rate": 0.01, "momentum": 0.9, "weight_decay": 0.1},
//   "ul_defaults": {"mu_top": 0.5, "eps": 0.001, "ridge": 1e-6,
//                   "combine_weight": 1, "init_scale": 1,
//                   "conv_covariance": "diagonal" | "full"},
//   "ul_gradient_sign": 1,
//   "record_wall_clock": true,
//   "network": {"layers": [
//       {"type": "linear", "out": 2, "ul": true},
//       {"type": "conv2d", "out_channels": 8, "kernel": 5, "padding": "same"},
//       {"type": "tanh", "ul": {"mu": 0.9, "eps": 0.01}}]},
//   "data": {"generator": "rotating", "points": 28, "deg": 5, "revolutions": 1,
//            "noise": 0, "seed": 1, "resample_noise": true}
//         | {"generator": "moving-square", "height": 64, "width": 64, "square": 8,
//            "trajectory": "bounce", "frames": 26, "sequences": 10, "seed": 1}
//         | {"manifest": "relative/or/absolute/manifest.json"},
//   "eval": {"kind": "decode-angle" | "localize" | "none", "data": {...}}
// }
//
// A UL layer without an explicit "mu" takes mu_top * 2^k, where k counts the
// UL layers above it.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tcoh/data.hpp"
#include "tcoh/network.hpp"
#include "tcoh/nn.hpp"
#include "tcoh/ul.hpp"

namespace tcoh::config {

struct UlOverride {
  std::optional<double> mu;
  std::optional<double> eps;
  std::optional<double> ridge;
  std::optional<double> combine_weight;
  std::optional<double> init_scale;
  std::optional<ul::ConvCovariance> conv_covariance;
};

struct LayerSpec {
  enum class Kind { linear, conv2d, tanh } kind = Kind::linear;
  std::size_t out = 0;  // linear outputs or conv output channels
  std::size_t kernel = 0;
  nn::Padding padding = nn::Padding::valid;
  std::optional<UlOverride> ul;
};

struct UlDefaults {
  double mu_top = 0.5;
  double eps = 0.001;
  double ridge = 1e-6;
  double combine_weight = 1.0;
  double init_scale = 1.0;
  ul::ConvCovariance conv_covariance = ul::ConvCovariance::diagonal;
};

struct RotatingSource {
  data::RotatingPointsSpec spec;
  bool resample_noise = true;  // fresh noise every epoch
};
struct SquareSource {
  data::MovingSquareSpec spec;
};
struct ManifestSource {
  std::filesystem::path path;
};
using DataSpec = std::variant<RotatingSource, SquareSource, ManifestSource>;

enum class EvalKind { none, decode_angle, localize };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int epochs = 1;
  nn::SgdConfig sgd;
  UlDefaults ul_defaults;
  double ul_gradient_sign = 1.0;
  bool record_wall_clock = true;
  std::optional<Tensor::Shape> input_shape;
  std::vector<LayerSpec> layers;
  DataSpec data;
  EvalKind eval_kind = EvalKind::none;
  std::optional<DataSpec> eval_data;  // defaults to the training data
};

/// Parses and validates; relative manifest paths resolve against `base_dir`.
/// Throws ConfigError describing the first problem.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// $TCOH_SEED when set to an unsigned integer, else `fallback`.
std::uint64_t env_seed(std::uint64_t fallback);

/// The dataset for a given epoch (noise is re-drawn per epoch when enabled).
data::SequenceDataset make_dataset(const DataSpec& spec, int epoch);

/// Builds the network for frames of `input_shape` with parameters drawn from
/// the config seed.
Network build_network(const ExperimentConfig& cfg, const Tensor::Shape& input_shape);

EvalKind parse_eval_kind(const std::string& name);
std::string eval_kind_name(EvalKind kind);

}  // namespace tcoh::config
