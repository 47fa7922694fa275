#pragma once

// Markov-chain statistics of an observed state sequence: the empirical
// adjacent-pair distribution, its stationary distribution, and the chain
// Laplacian used by the closed-form embedding.

#include <cstddef>
#include <span>
#include <vector>

#include "tcoh/linalg.hpp"

namespace tcoh::markov {

using linalg::Matrix;
using linalg::Vector;

struct MarkovStats {
  std::size_t n = 0;
  Vector p;  // stationary distribution
  Matrix pairs;  // pairs(i, j): probability of the ordered adjacent pair (i, j)
  Matrix laplacian;
  Matrix degree;  // diag(p)
};

/// Builds chain statistics from a sequence of state indices in [0, n).
///
/// pairs(i, j) is the fraction of the (length - 1) adjacent transitions that go
/// from i to j, and p_i = sum_j (pairs(i, j) + pairs(j, i)) / 2, which sums to
/// one and makes every Laplacian row sum to zero exactly.
MarkovStats stats_from_sequence(std::span<const std::size_t> states, std::size_t n);

/// Assembles p, laplacian and degree from a pair distribution.
MarkovStats stats_from_pairs(Matrix pairs);

/// Sequence 0, 1, ..., n-1 (a path graph).
std::vector<std::size_t> path_states(std::size_t n);

/// Sequence 0, 1, ..., n-1, 0 (a cycle graph).
std::vector<std::size_t> cycle_states(std::size_t n);

/// Objective of an embedding y (one row per state) on the chain:
/// 2 tr(Y^T L Y) - log det(Y^T D Y - Y^T p p^T Y).
/// Throws DegenerateError when the embedding covariance is not positive definite.
double objective_on_chain(const Matrix& y, const MarkovStats& stats);

/// The same objective written as a sum over adjacent pairs:
/// sum_ij pairs(i, j) |y_j - y_i|^2 - log det(cov_p(y)).
double objective_pairwise(const Matrix& y, const MarkovStats& stats);

/// p-weighted covariance Y^T D Y - (Y^T p)(Y^T p)^T.
Matrix embedding_covariance(const Matrix& y, const MarkovStats& stats);

}  // namespace tcoh::markov
