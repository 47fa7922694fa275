#pragma once

// Dense real linear algebra: a row-major Matrix type plus the symmetric
// eigensolvers and Cholesky-based routines the rest of the library uses.
// All arithmetic is double precision. Every function is pure.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tcoh::linalg {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vector col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  Matrix transpose() const;
  double frobenius_norm() const;
  double trace() const;
  bool all_finite() const;

  // Largest |A_ij - A_ji| relative to the Frobenius norm (0 for the zero matrix).
  double asymmetry() const;
  // (A + A^T) / 2
  Matrix symmetrized() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

/// a * b^T for column vectors a, b.
Matrix outer(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Eigenpairs sorted by ascending eigenvalue; column k of `vectors` pairs with
/// `values[k]`.
struct EigResult {
  Vector values;
  Matrix vectors;
};

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
///
/// Ties in the eigenvalue ordering keep the order in which the rotations left
/// the diagonal, so the result is deterministic. Each eigenvector is signed so
/// its largest-magnitude component is positive.
///
/// Throws DimensionError for non-square input and SymmetryError when the input
/// is not symmetric to 1e-12 relative.
EigResult eig_sym(const Matrix& s);

/// Solves lhs * u = lambda * rhs * u for symmetric `lhs` and symmetric
/// positive-definite `rhs` by reducing with rhs = G G^T. The returned vectors
/// are rhs-orthonormal. Throws FactorizationError when rhs is not positive
/// definite.
EigResult eig_gen_sym(const Matrix& lhs, const Matrix& rhs);

/// Lower-triangular G with G G^T = s. Throws FactorizationError carrying the
/// index of the first non-positive pivot.
Matrix cholesky(const Matrix& s);

/// log det(s) for symmetric positive-definite s.
double log_det_pd(const Matrix& s);

/// s^{-1/2} through the eigendecomposition. Throws SingularError when an
/// eigenvalue is at or below 1e-12 times the largest one.
Matrix inv_sqrt_sym(const Matrix& s);

/// Solves s x = b by Cholesky forward/back substitution.
Vector solve(const Matrix& s, std::span<const double> b);

/// Solves s X = B column by column, sharing one factorization.
Matrix solve(const Matrix& s, const Matrix& b);

/// Solves with an existing lower-triangular Cholesky factor.
Vector cholesky_solve(const Matrix& g, std::span<const double> b);

/// Ordinary least squares of y on [x | 1]. Returns one coefficient per column
/// of x followed by the intercept. Uses normal equations with a 1e-10 ridge.
Vector least_squares(const Matrix& x, std::span<const double> y);

}  // namespace tcoh::linalg
