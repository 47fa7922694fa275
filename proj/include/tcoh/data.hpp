#pragma once

// Sequence datasets: synthetic generators, noise injection and the on-disk
// layout (JSON manifest + PGM frames or CSV vectors + ground-truth CSV).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcoh/tensor.hpp"

namespace tcoh::data {

struct Sequence {
  std::vector<Tensor> frames;
  // One row per frame when present: {angle} in radians for rotating points,
  // {row, col} centroid for moving-object videos.
  std::vector<std::vector<double>> ground_truth;

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  std::string meta_json = "{}";  // generator spec and seed

  std::size_t frame_count() const;
  const Tensor::Shape& frame_shape() const;
  bool has_ground_truth() const;

  friend bool operator==(const SequenceDataset&, const SequenceDataset&) = default;
};

struct RotatingPointsSpec {
  std::size_t num_points = 28;
  double degrees_per_frame = 5.0;
  std::size_t num_revolutions = 1;
  double noise_level = 0.0;  // noise std as a fraction of each coordinate's clean std
  std::uint64_t seed = 1;

  /// Throws ValueError unless every field is in range and 360 is a whole
  /// multiple of degrees_per_frame.
  void validate() const;
  std::size_t frames_per_revolution() const;
};

/// A rigid point set rotating about its centroid, one sequence. Frame t is the
/// flattened (x0, y0, x1, y1, ...) positions after t * degrees_per_frame; the
/// angle is reduced modulo 360 degrees first, so a full turn repeats frame 0
/// bit for bit.
SequenceDataset gen_rotating_points(const RotatingPointsSpec& spec);

/// Adds zero-mean Gaussian noise with std `level` times the per-coordinate
/// std of `clean` (pooled over every frame of every sequence).
SequenceDataset add_noise(const SequenceDataset& clean, double level, std::uint64_t seed);

enum class Trajectory { still, bounce, random_walk };

struct MovingSquareSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t square_size = 8;
  Trajectory trajectory = Trajectory::bounce;
  std::size_t frames_per_sequence = 26;
  std::size_t sequences = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Binary square (intensity 1) on a zero background, 1 x H x W frames, with
/// the square's centroid as ground truth. Bounce moves at a constant integer
/// velocity and reflects off the borders; random walk takes integer steps in
/// [-2, 2] per axis.
SequenceDataset gen_moving_square(const MovingSquareSpec& spec);

Trajectory parse_trajectory(const std::string& name);
std::string trajectory_name(Trajectory t);

/// Reads a manifest and every frame it lists. PGM entries hold one frame
/// each (scaled to [0, 1]); CSV entries hold one vector frame per row.
/// Throws IoError naming the offending path.
SequenceDataset load_image_sequence(const std::filesystem::path& manifest_path);

/// Writes dir/manifest.json and the frame files. Image frames (1 x H x W or
/// H x W, values in [0, 1]) become 8-bit PGMs; vector frames become one CSV per
/// sequence. Returns the manifest path.
std::filesystem::path save_dataset(const SequenceDataset& ds, const std::filesystem::path& dir);

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t maxval = 255;
  std::vector<std::uint8_t> pixels;
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::vector<double>>& rows);
/// Shortest round-trip text for a double.
std::string format_double(double v);

}  // namespace tcoh::data
