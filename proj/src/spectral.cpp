#include "tcoh/spectral.hpp"

#include <cmath>
#include <sstream>

#include "tcoh/error.hpp"

namespace tcoh::spectral {

void require_orthonormal(const Matrix& r) {
  if (!r.is_square()) throw ValueError("rotation must be square");
  const Matrix gram = r * r.transpose();
  const double err = (gram - Matrix::identity(r.rows())).frobenius_norm();
  if (err > 1e-10) {
    std::ostringstream os;
    os << "rotation is not orthonormal (|R R^T - I|_F = " << err << ")";
    throw ValueError(os.str());
  }
}

Matrix embedding_from_basis(const Matrix& u, const Matrix& laplacian, const Matrix& rotation) {
  const Matrix gram = 2.0 * (u.transpose() * (laplacian * u));
  return u * linalg::inv_sqrt_sym(gram.symmetrized()) * rotation;
}

ClosedFormResult closed_form_embedding(const markov::MarkovStats& stats, std::size_t d,
                                       const std::optional<Matrix>& rotation) {
  if (d == 0) throw ValueError("closed_form_embedding: d must be positive");
  if (d + 1 > stats.n) {
    std::ostringstream os;
    os << "closed_form_embedding: d = " << d << " needs at least " << d + 1
       << " states, chain has " << stats.n;
    throw ValueError(os.str());
  }
  Matrix r = rotation.value_or(Matrix::identity(d));
  if (r.rows() != d || r.cols() != d) throw ValueError("closed_form_embedding: rotation must be d x d");
  require_orthonormal(r);

  const linalg::EigResult eig = linalg::eig_gen_sym(stats.laplacian, stats.degree);
  const double top = eig.values.back();
  const double cutoff = kZeroEigenvalueThreshold * std::max(top, 0.0);

  std::size_t first = 0;
  while (first < eig.values.size() && eig.values[first] <= cutoff) ++first;
  if (eig.values.size() - first < d) {
    std::ostringstream os;
    os << "closed_form_embedding: only " << eig.values.size() - first
       << " nonzero eigenvalues for d = " << d << "; spectrum:";
    for (double v : eig.values) os << ' ' << v;
    throw DegenerateError(os.str());
  }

  ClosedFormResult out;
  out.spectrum = eig.values;
  out.u = Matrix(stats.n, d);
  out.lambdas.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.u.set_col(k, eig.vectors.col(first + k));
    out.lambdas[k] = eig.values[first + k];
  }
  out.y = embedding_from_basis(out.u, stats.laplacian, r);
  out.j_opt = static_cast<double>(d);
  for (double lam : out.lambdas) out.j_opt += std::log(2.0 * lam);
  return out;
}

double stationarity_residual(const Matrix& y, const markov::MarkovStats& stats) {
  const Matrix sigma = markov::embedding_covariance(y, stats);
  Matrix sigma_inv_yt;
  try {
    sigma_inv_yt = linalg::solve(sigma, y.transpose());
  } catch (const FactorizationError&) {
    throw SingularError("stationarity_residual: embedding covariance is singular");
  }
  const Matrix y_sigma_inv = sigma_inv_yt.transpose();

  // (D - p p^T) Y sigma^{-1} = D Y sigma^{-1} - p (p^T Y sigma^{-1})
  const std::size_t n = stats.n;
  const std::size_t d = y.cols();
  Vector pt(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) pt[a] += stats.p[i] * y_sigma_inv(i, a);

  const Matrix ly = stats.laplacian * y;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double cov_term = stats.p[i] * y_sigma_inv(i, a) - stats.p[i] * pt[a];
      const double r = 4.0 * ly(i, a) - 2.0 * cov_term;
      acc += r * r;
    }
  }
  return std::sqrt(acc);
}

double stationarity_residual(const ClosedFormResult& result, const markov::MarkovStats& stats) {
  return stationarity_residual(result.y, stats);
}

}  // namespace tcoh::spectral
