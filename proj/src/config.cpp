#include "tcoh/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tcoh/error.hpp"
#include "tcoh/rng.hpp"

namespace tcoh::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      std::string list;
      for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
      throw ConfigError(where + ": unknown key '" + key + "' (allowed: " + list + ")");
    }
  }
}

double get_real(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj[key];
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

std::uint64_t get_uint(const json& obj, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj[key];
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback, const std::string& where) {
  const std::uint64_t v = get_uint(obj, key, fallback, where);
  if (v == 0) throw ConfigError(where + "." + key + " must be positive");
  return static_cast<std::size_t>(v);
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) throw ConfigError(where + "." + key + " must be a string");
  return obj[key].get<std::string>();
}

ul::ConvCovariance parse_covariance(const std::string& s, const std::string& where) {
  if (s == "diagonal") return ul::ConvCovariance::diagonal;
  if (s == "full") return ul::ConvCovariance::full;
  throw ConfigError(where + ": conv_covariance must be 'diagonal' or 'full'");
}

DataSpec parse_data(const json& j, std::uint64_t seed, const fs::path& base, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  if (j.contains("manifest")) {
    check_keys(j, {"manifest"}, where);
    fs::path p = get_string(j, "manifest", "", where);
    if (p.is_relative()) p = base / p;
    return ManifestSource{p};
  }
  const std::string gen = get_string(j, "generator", "", where);
  try {
    if (gen == "rotating") {
      check_keys(j, {"generator", "points", "deg", "revolutions", "noise", "seed", "resample_noise"}, where);
      RotatingSource src;
      src.spec.num_points = get_count(j, "points", 28, where);
      src.spec.degrees_per_frame = get_real(j, "deg", 5.0, where);
      src.spec.num_revolutions = get_count(j, "revolutions", 1, where);
      src.spec.noise_level = get_real(j, "noise", 0.0, where);
      src.spec.seed = get_uint(j, "seed", seed, where);
      src.resample_noise = get_bool(j, "resample_noise", true, where);
      src.spec.validate();
      return src;
    }
    if (gen == "moving-square") {
      check_keys(j, {"generator", "height", "width", "square", "trajectory", "frames", "sequences", "seed"}, where);
      SquareSource src;
      src.spec.height = get_count(j, "height", 64, where);
      src.spec.width = get_count(j, "width", 64, where);
      src.spec.square_size = get_count(j, "square", 8, where);
      src.spec.trajectory = data::parse_trajectory(get_string(j, "trajectory", "bounce", where));
      src.spec.frames_per_sequence = get_count(j, "frames", 26, where);
      src.spec.sequences = get_count(j, "sequences", 10, where);
      src.spec.seed = get_uint(j, "seed", seed, where);
      src.spec.validate();
      return src;
    }
  } catch (const ValueError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": needs \"manifest\" or \"generator\": \"rotating\" | \"moving-square\"");
}

UlOverride parse_ul_override(const json& j, const std::string& where) {
  UlOverride o;
  if (j.is_boolean()) return o;
  check_keys(j, {"mu", "eps", "ridge", "combine_weight", "init_scale", "conv_covariance"}, where);
  if (j.contains("mu")) o.mu = get_real(j, "mu", 0, where);
  if (j.contains("eps")) o.eps = get_real(j, "eps", 0, where);
  if (j.contains("ridge")) o.ridge = get_real(j, "ridge", 0, where);
  if (j.contains("combine_weight")) o.combine_weight = get_real(j, "combine_weight", 0, where);
  if (j.contains("init_scale")) o.init_scale = get_real(j, "init_scale", 0, where);
  if (j.contains("conv_covariance")) o.conv_covariance = parse_covariance(get_string(j, "conv_covariance", "", where), where);
  return o;
}

LayerSpec parse_layer(const json& j, const std::string& where) {
  const std::string type = get_string(j, "type", "", where);
  LayerSpec l;
  if (type == "linear") {
    check_keys(j, {"type", "out", "ul"}, where);
    l.kind = LayerSpec::Kind::linear;
    if (!j.contains("out")) throw ConfigError(where + ": linear layer needs 'out'");
    l.out = get_count(j, "out", 1, where);
  } else if (type == "conv2d") {
    check_keys(j, {"type", "out_channels", "kernel", "padding", "ul"}, where);
    l.kind = LayerSpec::Kind::conv2d;
    if (!j.contains("out_channels")) throw ConfigError(where + ": conv2d layer needs 'out_channels'");
    l.out = get_count(j, "out_channels", 1, where);
    l.kernel = get_count(j, "kernel", 5, where);
    const std::string pad = get_string(j, "padding", "same", where);
    if (pad == "same") {
      l.padding = nn::Padding::same;
      if (l.kernel % 2 == 0) throw ConfigError(where + ": same padding needs an odd kernel");
    } else if (pad == "valid") {
      l.padding = nn::Padding::valid;
    } else {
      throw ConfigError(where + ": padding must be 'same' or 'valid'");
    }
  } else if (type == "tanh") {
    check_keys(j, {"type", "ul"}, where);
    l.kind = LayerSpec::Kind::tanh;
  } else {
    throw ConfigError(where + ": type must be 'linear', 'conv2d' or 'tanh'");
  }
  if (j.contains("ul")) {
    const json& u = j["ul"];
    if (u.is_boolean()) {
      if (u.get<bool>()) l.ul = UlOverride{};
    } else if (u.is_object()) {
      l.ul = parse_ul_override(u, where + ".ul");
    } else {
      throw ConfigError(where + ".ul must be a boolean or an object");
    }
  }
  return l;
}

}  // namespace

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* s = std::getenv("TCOH_SEED");
  if (s == nullptr || *s == '\0') return fallback;
  std::uint64_t v = 0;
  const char* end = s + std::char_traits<char>::length(s);
  const auto res = std::from_chars(s, end, v);
  if (res.ec != std::errc{} || res.ptr != end) throw ConfigError(std::string("TCOH_SEED is not an unsigned integer: ") + s);
  return v;
}

EvalKind parse_eval_kind(const std::string& name) {
  if (name == "none") return EvalKind::none;
  if (name == "decode-angle") return EvalKind::decode_angle;
  if (name == "localize") return EvalKind::localize;
  throw ConfigError("eval kind must be 'decode-angle', 'localize' or 'none', got '" + name + "'");
}

std::string eval_kind_name(EvalKind kind) {
  switch (kind) {
    case EvalKind::decode_angle:
      return "decode-angle";
    case EvalKind::localize:
      return "localize";
    case EvalKind::none:
      break;
  }
  return "none";
}

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "epochs", "sgd", "ul_defaults", "ul_gradient_sign", "record_wall_clock", "network", "data",
                 "eval"},
             "config");
  ExperimentConfig cfg;
  cfg.seed = j.contains("seed") ? get_uint(j, "seed", 1, "config") : env_seed(1);

  if (j.contains("epochs")) {
    if (!j["epochs"].is_number_integer() || j["epochs"].get<long long>() < 0) {
      throw ConfigError("config.epochs must be a non-negative integer");
    }
    cfg.epochs = j["epochs"].get<int>();
  }

  if (j.contains("sgd")) {
    const json& s = j["sgd"];
    check_keys(s, {"learning_rate", "momentum", "weight_decay"}, "config.sgd");
    cfg.sgd.learning_rate = get_real(s, "learning_rate", cfg.sgd.learning_rate, "config.sgd");
    cfg.sgd.momentum = get_real(s, "momentum", cfg.sgd.momentum, "config.sgd");
    cfg.sgd.weight_decay = get_real(s, "weight_decay", cfg.sgd.weight_decay, "config.sgd");
  }
  cfg.sgd.validate();

  if (j.contains("ul_defaults")) {
    const json& u = j["ul_defaults"];
    const std::string w = "config.ul_defaults";
    check_keys(u, {"mu_top", "eps", "ridge", "combine_weight", "init_scale", "conv_covariance"}, w);
    cfg.ul_defaults.mu_top = get_real(u, "mu_top", cfg.ul_defaults.mu_top, w);
    cfg.ul_defaults.eps = get_real(u, "eps", cfg.ul_defaults.eps, w);
    cfg.ul_defaults.ridge = get_real(u, "ridge", cfg.ul_defaults.ridge, w);
    cfg.ul_defaults.combine_weight = get_real(u, "combine_weight", cfg.ul_defaults.combine_weight, w);
    cfg.ul_defaults.init_scale = get_real(u, "init_scale", cfg.ul_defaults.init_scale, w);
    if (u.contains("conv_covariance")) cfg.ul_defaults.conv_covariance = parse_covariance(get_string(u, "conv_covariance", "", w), w);
  }

  cfg.ul_gradient_sign = get_real(j, "ul_gradient_sign", 1.0, "config");
  if (cfg.ul_gradient_sign != 1.0 && cfg.ul_gradient_sign != -1.0) {
    throw ConfigError("config.ul_gradient_sign must be 1 or -1");
  }
  cfg.record_wall_clock = get_bool(j, "record_wall_clock", true, "config");

  if (!j.contains("network")) throw ConfigError("config: missing 'network'");
  const json& net = j["network"];
  check_keys(net, {"input_shape", "layers"}, "config.network");
  if (net.contains("input_shape")) {
    if (!net["input_shape"].is_array() || net["input_shape"].empty()) {
      throw ConfigError("config.network.input_shape must be a non-empty array");
    }
    Tensor::Shape shape;
    for (const json& e : net["input_shape"]) {
      if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) {
        throw ConfigError("config.network.input_shape entries must be positive integers");
      }
      shape.push_back(e.get<std::size_t>());
    }
    cfg.input_shape = shape;
  }
  if (!net.contains("layers") || !net["layers"].is_array() || net["layers"].empty()) {
    throw ConfigError("config.network.layers must be a non-empty array");
  }
  for (std::size_t i = 0; i < net["layers"].size(); ++i) {
    cfg.layers.push_back(parse_layer(net["layers"][i], "config.network.layers[" + std::to_string(i) + "]"));
  }
  if (std::none_of(cfg.layers.begin(), cfg.layers.end(), [](const LayerSpec& l) { return l.ul.has_value(); })) {
    throw ConfigError("config.network: at least one layer needs a UL attachment (\"ul\": true)");
  }

  if (!j.contains("data")) throw ConfigError("config: missing 'data'");
  cfg.data = parse_data(j["data"], cfg.seed, base_dir, "config.data");

  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_keys(e, {"kind", "data"}, "config.eval");
    cfg.eval_kind = parse_eval_kind(get_string(e, "kind", "none", "config.eval"));
    if (e.contains("data")) cfg.eval_data = parse_data(e["data"], cfg.seed, base_dir, "config.eval.data");
  }

  // Resolve every UL hyperparameter now so range errors surface as config errors.
  std::size_t ul_above = 0;
  for (auto it = cfg.layers.rbegin(); it != cfg.layers.rend(); ++it) {
    if (!it->ul) continue;
    UlOverride& o = *it->ul;
    if (!o.mu) o.mu = ul::scheduled_mu(cfg.ul_defaults.mu_top, ul_above);
    ++ul_above;
    ul::UlHyper h{*o.mu, o.eps.value_or(cfg.ul_defaults.eps), o.ridge.value_or(cfg.ul_defaults.ridge),
                  o.combine_weight.value_or(cfg.ul_defaults.combine_weight),
                  o.init_scale.value_or(cfg.ul_defaults.init_scale)};
    h.validate();
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

data::SequenceDataset make_dataset(const DataSpec& spec, int epoch) {
  if (const auto* r = std::get_if<RotatingSource>(&spec)) {
    if (!r->resample_noise || r->spec.noise_level == 0.0) return data::gen_rotating_points(r->spec);
    data::RotatingPointsSpec clean = r->spec;
    clean.noise_level = 0.0;
    data::SequenceDataset ds = data::gen_rotating_points(clean);
    data::SequenceDataset noisy =
        data::add_noise(ds, r->spec.noise_level, mix_seed(r->spec.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    noisy.meta_json = data::gen_rotating_points(r->spec).meta_json;
    return noisy;
  }
  if (const auto* s = std::get_if<SquareSource>(&spec)) return data::gen_moving_square(s->spec);
  return data::load_image_sequence(std::get<ManifestSource>(spec).path);
}

Network build_network(const ExperimentConfig& cfg, const Tensor::Shape& input_shape) {
  if (cfg.input_shape && *cfg.input_shape != input_shape) {
    throw ConfigError("config.network.input_shape " + shape_string(*cfg.input_shape) +
                      " does not match the data frames " + shape_string(input_shape));
  }
  Rng rng(mix_seed(cfg.seed, 7));
  Network net(input_shape);
  for (const LayerSpec& l : cfg.layers) {
    try {
      switch (l.kind) {
        case LayerSpec::Kind::linear:
          net.add_linear(l.out, rng);
          break;
        case LayerSpec::Kind::conv2d:
          net.add_conv2d(l.out, l.kernel, l.padding, rng);
          break;
        case LayerSpec::Kind::tanh:
          net.add_tanh();
          break;
      }
    } catch (const DimensionError& e) {
      throw ConfigError(std::string("config.network: ") + e.what());
    }
    if (!l.ul) continue;
    const UlOverride& o = *l.ul;
    ul::UlHyper h{o.mu.value_or(cfg.ul_defaults.mu_top), o.eps.value_or(cfg.ul_defaults.eps),
                  o.ridge.value_or(cfg.ul_defaults.ridge), o.combine_weight.value_or(cfg.ul_defaults.combine_weight),
                  o.init_scale.value_or(cfg.ul_defaults.init_scale)};
    try {
      net.attach_ul(net.stages().size() - 1, h, o.conv_covariance.value_or(cfg.ul_defaults.conv_covariance));
    } catch (const DimensionError& e) {
      throw ConfigError(std::string("config.network: ") + e.what());
    }
  }
  return net;
}

}  // namespace tcoh::config
