#include "tcoh/markov.hpp"

#include <cmath>
#include <sstream>

#include "tcoh/error.hpp"

namespace tcoh::markov {

namespace {

void require_rows(const Matrix& y, const MarkovStats& stats) {
  if (y.rows() != stats.n || y.cols() == 0) {
    std::ostringstream os;
    os << "embedding has " << y.rows() << " rows, chain has " << stats.n << " states";
    throw DimensionError(os.str());
  }
}

double covariance_log_det(const Matrix& y, const MarkovStats& stats) {
  const Matrix cov = embedding_covariance(y, stats);
  try {
    return linalg::log_det_pd(cov);
  } catch (const FactorizationError& e) {
    std::ostringstream os;
    os << "embedding covariance is singular or indefinite (pivot " << e.pivot()
       << "); the embedding collapses along some direction";
    throw DegenerateError(os.str());
  }
}

}  // namespace

MarkovStats stats_from_pairs(Matrix pairs) {
  if (!pairs.is_square() || pairs.empty()) throw DimensionError("pair distribution must be square");
  const std::size_t n = pairs.rows();
  MarkovStats s;
  s.n = n;
  s.p.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s.p[i] += 0.5 * (pairs(i, j) + pairs(j, i));

  s.laplacian = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s.laplacian(i, j) = i == j ? s.p[i] - pairs(i, i) : -0.5 * (pairs(i, j) + pairs(j, i));
    }
  }
  s.degree = Matrix::diagonal(s.p);
  s.pairs = std::move(pairs);
  return s;
}

MarkovStats stats_from_sequence(std::span<const std::size_t> states, std::size_t n) {
  if (n == 0) throw ValueError("stats_from_sequence: state count must be positive");
  if (states.size() < 2) {
    throw ValueError("stats_from_sequence: need at least two states to form a transition");
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k] >= n) {
      std::ostringstream os;
      os << "stats_from_sequence: state " << states[k] << " at position " << k
         << " is outside [0, " << n << ")";
      throw ValueError(os.str());
    }
  }
  Matrix pairs(n, n);
  const double w = 1.0 / static_cast<double>(states.size() - 1);
  for (std::size_t k = 0; k + 1 < states.size(); ++k) pairs(states[k], states[k + 1]) += w;
  return stats_from_pairs(std::move(pairs));
}

std::vector<std::size_t> path_states(std::size_t n) {
  std::vector<std::size_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

std::vector<std::size_t> cycle_states(std::size_t n) {
  auto s = path_states(n);
  s.push_back(0);
  return s;
}

Matrix embedding_covariance(const Matrix& y, const MarkovStats& stats) {
  require_rows(y, stats);
  const std::size_t d = y.cols();
  Matrix cov(d, d);
  Vector mean(d, 0.0);
  for (std::size_t i = 0; i < stats.n; ++i) {
    const auto row = y.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      mean[a] += stats.p[i] * row[a];
      for (std::size_t b = 0; b < d; ++b) cov(a, b) += stats.p[i] * row[a] * row[b];
    }
  }
  cov -= linalg::outer(mean, mean);
  return cov.symmetrized();
}

double objective_on_chain(const Matrix& y, const MarkovStats& stats) {
  require_rows(y, stats);
  const Matrix ly = stats.laplacian * y;
  double tr = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t a = 0; a < y.cols(); ++a) tr += y(i, a) * ly(i, a);
  return 2.0 * tr - covariance_log_det(y, stats);
}

double objective_pairwise(const Matrix& y, const MarkovStats& stats) {
  require_rows(y, stats);
  double smooth = 0.0;
  for (std::size_t i = 0; i < stats.n; ++i) {
    for (std::size_t j = 0; j < stats.n; ++j) {
      const double pij = stats.pairs(i, j);
      if (pij == 0.0) continue;
      double dist2 = 0.0;
      for (std::size_t a = 0; a < y.cols(); ++a) {
        const double diff = y(j, a) - y(i, a);
        dist2 += diff * diff;
      }
      smooth += pij * dist2;
    }
  }
  return smooth - covariance_log_det(y, stats);
}

}  // namespace tcoh::markov
