#pragma once

// Closed-form minimizer of the temporal-coherence objective on a Markov chain:
// Y = U (2 U^T L U)^{-1/2} R, with U the generalized eigenvectors of (L, D)
// for the d smallest nonzero eigenvalues.

#include <cstddef>
#include <optional>

#include "tcoh/linalg.hpp"
#include "tcoh/markov.hpp"

namespace tcoh::spectral {

using linalg::Matrix;
using linalg::Vector;

struct ClosedFormResult {
  Matrix y;        // n x d embedding, one row per state
  Matrix u;        // n x d selected generalized eigenvectors, D-orthonormal
  Vector lambdas;  // d smallest nonzero generalized eigenvalues, ascending
  double j_opt = 0.0;  // d + log det(2 diag(lambdas))
  Vector spectrum;     // every generalized eigenvalue, ascending
};

/// Eigenvalues at or below this fraction of the largest are treated as the
/// kernel (the constant vector and one vector per extra connected component).
inline constexpr double kZeroEigenvalueThreshold = 1e-10;

/// Computes the closed-form embedding. `rotation` defaults to the identity and
/// must be orthonormal. Throws ValueError when d is 0 or exceeds n - 1 or the
/// rotation is not orthonormal, and DegenerateError when the chain has fewer
/// than d nonzero eigenvalues.
ClosedFormResult closed_form_embedding(const markov::MarkovStats& stats, std::size_t d,
                                       const std::optional<Matrix>& rotation = std::nullopt);

/// Y = U (2 U^T L U)^{-1/2} R for an arbitrary basis U (columns need not be
/// normalized). 2 U^T L U is symmetrized before the inverse square root.
Matrix embedding_from_basis(const Matrix& u, const Matrix& laplacian, const Matrix& rotation);

/// Frobenius norm of 4 L Y - 2 (D - p p^T) Y sigma^{-1}, the gradient of the
/// chain objective, with sigma the p-weighted covariance of Y.
/// Throws SingularError when sigma is singular.
double stationarity_residual(const Matrix& y, const markov::MarkovStats& stats);
double stationarity_residual(const ClosedFormResult& result, const markov::MarkovStats& stats);

/// Throws ValueError unless r r^T = I to 1e-10.
void require_orthonormal(const Matrix& r);

}  // namespace tcoh::spectral
