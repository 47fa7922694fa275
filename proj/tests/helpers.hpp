#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "tcoh/linalg.hpp"

namespace testutil {

using tcoh::linalg::Matrix;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(gen);
  return m;
}

inline Matrix random_symmetric(std::size_t n, std::mt19937_64& gen) {
  Matrix a = random_matrix(n, n, gen);
  return (a + a.transpose()) * 0.5;
}

// A A^T + n I: comfortably positive definite.
inline Matrix random_spd(std::size_t n, std::mt19937_64& gen) {
  Matrix a = random_matrix(n, n, gen);
  Matrix s = a * a.transpose();
  for (std::size_t i = 0; i < n; ++i) s(i, i) += static_cast<double>(n);
  return s.symmetrized();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tcoh_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
