#include "tcoh/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <cctype>
#include <sstream>

#include <json.hpp>

#include "tcoh/error.hpp"
#include "tcoh/rng.hpp"

namespace tcoh::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t SequenceDataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.frames.size();
  return n;
}

const Tensor::Shape& SequenceDataset::frame_shape() const {
  for (const auto& s : sequences)
    if (!s.frames.empty()) return s.frames.front().shape();
  throw ValueError("dataset has no frames");
}

bool SequenceDataset::has_ground_truth() const {
  if (sequences.empty()) return false;
  return std::all_of(sequences.begin(), sequences.end(), [](const Sequence& s) {
    return !s.frames.empty() && s.ground_truth.size() == s.frames.size();
  });
}

void RotatingPointsSpec::validate() const {
  if (num_points < 2) throw ValueError("rotating points: need at least two points");
  if (!(degrees_per_frame > 0.0) || degrees_per_frame > 360.0) {
    throw ValueError("rotating points: degrees per frame must lie in (0, 360]");
  }
  const double per_rev = 360.0 / degrees_per_frame;
  if (std::abs(per_rev - std::round(per_rev)) > 1e-9) {
    throw ValueError("rotating points: 360 must be a whole multiple of the degrees per frame");
  }
  if (num_revolutions == 0) throw ValueError("rotating points: need at least one revolution");
  if (!(noise_level >= 0.0 && noise_level <= 0.5)) {
    throw ValueError("rotating points: noise level must lie in [0, 0.5]");
  }
}

std::size_t RotatingPointsSpec::frames_per_revolution() const {
  return static_cast<std::size_t>(std::llround(360.0 / degrees_per_frame));
}

SequenceDataset gen_rotating_points(const RotatingPointsSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<double> px(spec.num_points), py(spec.num_points);
  for (std::size_t i = 0; i < spec.num_points; ++i) {
    px[i] = rng.uniform(-1.0, 1.0);
    py[i] = rng.uniform(-1.0, 1.0);
  }
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < spec.num_points; ++i) {
    cx += px[i];
    cy += py[i];
  }
  cx /= static_cast<double>(spec.num_points);
  cy /= static_cast<double>(spec.num_points);
  for (std::size_t i = 0; i < spec.num_points; ++i) {
    px[i] -= cx;
    py[i] -= cy;
  }

  const std::size_t per_rev = spec.frames_per_revolution();
  Sequence seq;
  for (std::size_t t = 0; t < per_rev * spec.num_revolutions; ++t) {
    const double deg = (t % per_rev) * spec.degrees_per_frame;
    const double rad = deg * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    std::vector<double> frame(2 * spec.num_points);
    for (std::size_t i = 0; i < spec.num_points; ++i) {
      frame[2 * i] = c * px[i] - s * py[i];
      frame[2 * i + 1] = s * px[i] + c * py[i];
    }
    seq.frames.push_back(Tensor::vector(std::move(frame)));
    seq.ground_truth.push_back({rad});
  }

  SequenceDataset ds;
  ds.sequences.push_back(std::move(seq));
  ds.meta_json = json{{"generator", "rotating"},
                      {"points", spec.num_points},
                      {"deg", spec.degrees_per_frame},
                      {"revolutions", spec.num_revolutions},
                      {"noise", spec.noise_level},
                      {"seed", spec.seed}}
                     .dump();
  if (spec.noise_level > 0.0) {
    SequenceDataset noisy = add_noise(ds, spec.noise_level, mix_seed(spec.seed, 1));
    noisy.meta_json = ds.meta_json;
    return noisy;
  }
  return ds;
}

SequenceDataset add_noise(const SequenceDataset& clean, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) throw ValueError("add_noise: level must be non-negative");
  if (level == 0.0 || clean.frame_count() == 0) return clean;
  const std::size_t dim = shape_size(clean.frame_shape());
  std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
  const double n = static_cast<double>(clean.frame_count());
  for (const auto& s : clean.sequences)
    for (const auto& f : s.frames)
      for (std::size_t j = 0; j < dim; ++j) mean[j] += f[j] / n;
  for (const auto& s : clean.sequences)
    for (const auto& f : s.frames)
      for (std::size_t j = 0; j < dim; ++j) sq[j] += (f[j] - mean[j]) * (f[j] - mean[j]) / n;

  Rng rng(seed);
  SequenceDataset out = clean;
  for (auto& s : out.sequences)
    for (auto& f : s.frames)
      for (std::size_t j = 0; j < dim; ++j) f[j] += rng.normal(0.0, level * std::sqrt(sq[j]));
  return out;
}

void MovingSquareSpec::validate() const {
  if (height == 0 || width == 0) throw ValueError("moving square: image size must be positive");
  if (square_size == 0) throw ValueError("moving square: square size must be positive");
  if (square_size > height || square_size > width) {
    throw ValueError("moving square: square is larger than the image");
  }
  if (frames_per_sequence == 0 || sequences == 0) {
    throw ValueError("moving square: need at least one sequence and one frame");
  }
}

Trajectory parse_trajectory(const std::string& name) {
  if (name == "static" || name == "still") return Trajectory::still;
  if (name == "bounce" || name == "linear") return Trajectory::bounce;
  if (name == "random-walk" || name == "random_walk") return Trajectory::random_walk;
  throw ValueError("unknown trajectory '" + name + "' (static | bounce | random-walk)");
}

std::string trajectory_name(Trajectory t) {
  switch (t) {
    case Trajectory::still:
      return "static";
    case Trajectory::bounce:
      return "bounce";
    case Trajectory::random_walk:
      return "random-walk";
  }
  return "bounce";
}

namespace {

// Moves `pos` by `vel` inside [0, hi], reflecting off either end.
void advance_reflecting(std::int64_t& pos, std::int64_t& vel, std::int64_t hi) {
  if (hi == 0) {
    pos = 0;
    return;
  }
  pos += vel;
  while (pos < 0 || pos > hi) {
    if (pos < 0) pos = -pos;
    if (pos > hi) pos = 2 * hi - pos;
    vel = -vel;
  }
}

std::int64_t random_velocity(Rng& rng) {
  const std::int64_t mag = rng.uniform_int(1, 3);
  return rng.uniform() < 0.5 ? -mag : mag;
}

}  // namespace

SequenceDataset gen_moving_square(const MovingSquareSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto hi_r = static_cast<std::int64_t>(spec.height - spec.square_size);
  const auto hi_c = static_cast<std::int64_t>(spec.width - spec.square_size);
  const double half = (static_cast<double>(spec.square_size) - 1.0) / 2.0;

  SequenceDataset ds;
  for (std::size_t s = 0; s < spec.sequences; ++s) {
    std::int64_t r = rng.uniform_int(0, hi_r);
    std::int64_t c = rng.uniform_int(0, hi_c);
    std::int64_t vr = 0, vc = 0;
    if (spec.trajectory == Trajectory::bounce) {
      vr = random_velocity(rng);
      vc = random_velocity(rng);
    }
    Sequence seq;
    for (std::size_t t = 0; t < spec.frames_per_sequence; ++t) {
      if (t > 0) {
        if (spec.trajectory == Trajectory::random_walk) {
          vr = rng.uniform_int(-2, 2);
          vc = rng.uniform_int(-2, 2);
        }
        advance_reflecting(r, vr, hi_r);
        advance_reflecting(c, vc, hi_c);
      }
      Tensor frame({1, spec.height, spec.width});
      for (std::size_t y = 0; y < spec.square_size; ++y)
        for (std::size_t x = 0; x < spec.square_size; ++x)
          frame.at(0, static_cast<std::size_t>(r) + y, static_cast<std::size_t>(c) + x) = 1.0;
      seq.frames.push_back(std::move(frame));
      seq.ground_truth.push_back({static_cast<double>(r) + half, static_cast<double>(c) + half});
    }
    ds.sequences.push_back(std::move(seq));
  }
  ds.meta_json = json{{"generator", "moving-square"},
                      {"height", spec.height},
                      {"width", spec.width},
                      {"square", spec.square_size},
                      {"trajectory", trajectory_name(spec.trajectory)},
                      {"frames", spec.frames_per_sequence},
                      {"sequences", spec.sequences},
                      {"seed", spec.seed}}
                     .dump();
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const fs::path& path, const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::vector<double>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size()) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + field + "'");
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> void { throw IoError(path.string() + ": malformed PGM: " + why); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) fail("expected a number in the header");
    return std::stoul(bytes.substr(start, pos - start));
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("missing P5 magic");
  pos = 2;
  GrayImage img;
  img.width = read_uint();
  img.height = read_uint();
  img.maxval = read_uint();
  if (img.width == 0 || img.height == 0) fail("zero image size");
  if (img.maxval == 0 || img.maxval > 255) fail("maxval must lie in [1, 255]");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    fail("header must end with a single whitespace");
  }
  ++pos;
  const std::size_t count = img.width * img.height;
  if (bytes.size() - pos < count) fail("truncated pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

bool is_image_shape(const Tensor::Shape& s) { return s.size() == 2 || (s.size() == 3 && s[0] == 1); }

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw IoError(where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

fs::path save_dataset(const SequenceDataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["meta"] = json::parse(ds.meta_json.empty() ? "{}" : ds.meta_json);
  manifest["sequences"] = json::array();
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    const Sequence& seq = ds.sequences[s];
    std::ostringstream stem;
    stem << "seq" << std::setw(3) << std::setfill('0') << s;
    json entry;
    entry["frames"] = json::array();
    if (!seq.frames.empty() && is_image_shape(seq.frames.front().shape())) {
      for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const Tensor& frame = seq.frames[f];
        const auto& shape = frame.shape();
        GrayImage img;
        img.height = shape[shape.size() - 2];
        img.width = shape[shape.size() - 1];
        img.pixels.resize(frame.size());
        for (std::size_t i = 0; i < frame.size(); ++i) {
          img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(frame[i], 0.0, 1.0) * 255.0));
        }
        std::ostringstream name;
        name << stem.str() << "_f" << std::setw(4) << std::setfill('0') << f << ".pgm";
        write_pgm(dir / name.str(), img);
        entry["frames"].push_back(name.str());
      }
    } else if (!seq.frames.empty()) {
      std::vector<std::vector<double>> rows;
      for (const Tensor& frame : seq.frames) {
        if (frame.rank() != 1) {
          throw IoError("save_dataset: frames of shape " + shape_string(frame.shape()) +
                        " are neither vectors nor grayscale images");
        }
        rows.push_back(frame.data());
      }
      write_csv(dir / (stem.str() + ".csv"), rows);
      entry["frames"].push_back(stem.str() + ".csv");
    }
    if (!seq.ground_truth.empty()) {
      write_csv(dir / (stem.str() + "_gt.csv"), seq.ground_truth);
      entry["ground_truth"] = stem.str() + "_gt.csv";
    }
    manifest["sequences"].push_back(std::move(entry));
  }
  const fs::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

SequenceDataset load_image_sequence(const fs::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  const std::string where = manifest_path.string();
  if (!manifest.is_object() || !manifest.contains("sequences") || !manifest["sequences"].is_array()) {
    throw IoError(where + ": manifest needs a 'sequences' array");
  }
  reject_unknown_keys(manifest, {"sequences", "meta"}, where);
  const fs::path base = manifest_path.parent_path();

  SequenceDataset ds;
  if (manifest.contains("meta")) ds.meta_json = manifest["meta"].dump();
  std::optional<Tensor::Shape> shape;
  for (const json& entry : manifest["sequences"]) {
    if (!entry.is_object() || !entry.contains("frames") || !entry["frames"].is_array()) {
      throw IoError(where + ": every sequence needs a 'frames' array");
    }
    reject_unknown_keys(entry, {"frames", "ground_truth"}, where);
    Sequence seq;
    for (const json& item : entry["frames"]) {
      if (!item.is_string()) throw IoError(where + ": frame entries must be paths");
      const fs::path path = base / item.get<std::string>();
      if (path.extension() == ".csv") {
        for (auto& row : read_csv(path)) {
          const std::size_t n = row.size();
          seq.frames.push_back(Tensor({n}, std::move(row)));
        }
      } else {
        const GrayImage img = read_pgm(path);
        Tensor frame({1, img.height, img.width});
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
          frame[i] = static_cast<double>(img.pixels[i]) / static_cast<double>(img.maxval);
        }
        seq.frames.push_back(std::move(frame));
      }
      const Tensor::Shape& got = seq.frames.back().shape();
      if (!shape) shape = got;
      if (*shape != got) {
        throw IoError(path.string() + ": frame shape " + shape_string(got) + " differs from " +
                      shape_string(*shape));
      }
    }
    if (entry.contains("ground_truth") && !entry["ground_truth"].is_null()) {
      const fs::path gt_path = base / entry["ground_truth"].get<std::string>();
      seq.ground_truth = read_csv(gt_path);
      if (seq.ground_truth.size() != seq.frames.size()) {
        throw IoError(gt_path.string() + ": " + std::to_string(seq.ground_truth.size()) +
                      " ground-truth rows for " + std::to_string(seq.frames.size()) + " frames");
      }
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace tcoh::data
