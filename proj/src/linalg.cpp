#include "tcoh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "tcoh/error.hpp"

namespace tcoh::linalg {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (!m.is_square() || m.empty()) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

void require_symmetric(const Matrix& m, const char* what) {
  if (m.asymmetry() > 1e-12) {
    std::ostringstream os;
    os << what << ": matrix is not symmetric (relative asymmetry " << m.asymmetry() << ")";
    throw SymmetryError(os.str());
  }
}

// Forward substitution g y = b for lower-triangular g.
void forward_subst(const Matrix& g, std::span<double> x) {
  const std::size_t n = g.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = x[i];
    for (std::size_t k = 0; k < i; ++k) acc -= g(i, k) * x[k];
    x[i] = acc / g(i, i);
  }
}

// Back substitution g^T x = y for lower-triangular g.
void back_subst_transposed(const Matrix& g, std::span<double> x) {
  const std::size_t n = g.rows();
  for (std::size_t i = n; i-- > 0;) {
    double acc = x[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= g(k, i) * x[k];
    x[i] = acc / g(i, i);
  }
}

void normalize_sign(Matrix& v, std::size_t c) {
  std::size_t best = 0;
  double best_abs = -1.0;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    if (std::abs(v(r, c)) > best_abs) {
      best_abs = std::abs(v(r, c));
      best = r;
    }
  }
  if (v(best, c) < 0.0) {
    for (std::size_t r = 0; r < v.rows(); ++r) v(r, c) = -v(r, c);
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: data length does not match rows x cols");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Vector Matrix::col(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw DimensionError("Matrix::set_col: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::frobenius_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

double Matrix::trace() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) acc += (*this)(i, i);
  return acc;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::asymmetry() const {
  if (!is_square()) return std::numeric_limits<double>::infinity();
  const double scale = frobenius_norm();
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c)
      worst = std::max(worst, std::abs((*this)(r, c) - (*this)(c, r)));
  return worst / scale;
}

Matrix Matrix::symmetrized() const {
  Matrix out(*this);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c) {
      const double m = 0.5 * ((*this)(r, c) + (*this)(c, r));
      out(r, c) = m;
      out(c, r) = m;
    }
  return out;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("Matrix +: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("Matrix -: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "Matrix *: inner dimensions differ (" << a.rows() << "x" << a.cols() << " times "
       << b.rows() << "x" << b.cols() << ")";
    throw DimensionError(os.str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionError("Matrix * vector: length mismatch");
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

Matrix outer(std::span<const double> a, std::span<const double> b) {
  Matrix out(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out(i, j) = a[i] * b[j];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

EigResult eig_sym(const Matrix& s) {
  require_square(s, "eig_sym");
  require_symmetric(s, "eig_sym");
  const std::size_t n = s.rows();
  Matrix a = s.symmetrized();
  Matrix v = Matrix::identity(n);
  const double scale = a.frobenius_norm();

  if (scale > 0.0) {
    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      double off = 0.0;
      for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
      if (std::sqrt(off) <= 1e-15 * scale) break;

      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (std::abs(apq) <= 1e-18 * scale) {
            a(p, q) = a(q, p) = 0.0;
            continue;
          }
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          double t;
          if (std::abs(theta) > 1e150) {
            t = 0.5 / theta;
          } else {
            t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          }
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double sn = t * c;

          for (std::size_t k = 0; k < n; ++k) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = c * akp - sn * akq;
            a(k, q) = sn * akp + c * akq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double apk = a(p, k);
            const double aqk = a(q, k);
            a(p, k) = c * apk - sn * aqk;
            a(q, k) = sn * apk + c * aqk;
          }
          a(p, q) = a(q, p) = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - sn * vkq;
            v(k, q) = sn * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    normalize_sign(out.vectors, k);
  }
  return out;
}

EigResult eig_gen_sym(const Matrix& lhs, const Matrix& rhs) {
  require_square(lhs, "eig_gen_sym");
  require_square(rhs, "eig_gen_sym");
  if (lhs.rows() != rhs.rows()) throw DimensionError("eig_gen_sym: matrices differ in size");
  require_symmetric(lhs, "eig_gen_sym");
  require_symmetric(rhs, "eig_gen_sym");
  const std::size_t n = lhs.rows();
  const Matrix g = cholesky(rhs);

  // reduced = G^{-1} lhs G^{-T}: first G^{-1} lhs column by column, then the
  // same solve on the transpose (lhs is symmetric).
  Matrix half(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    Vector col = lhs.col(c);
    forward_subst(g, col);
    half.set_col(c, col);
  }
  Matrix half_t = half.transpose();
  Matrix reduced(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    Vector col = half_t.col(c);
    forward_subst(g, col);
    reduced.set_col(c, col);
  }

  EigResult eig = eig_sym(reduced.symmetrized());
  for (std::size_t c = 0; c < n; ++c) {
    Vector col = eig.vectors.col(c);
    back_subst_transposed(g, col);
    eig.vectors.set_col(c, col);
  }
  return eig;
}

Matrix cholesky(const Matrix& s) {
  require_square(s, "cholesky");
  const std::size_t n = s.rows();
  Matrix g(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= g(j, k) * g(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "cholesky: matrix is not positive definite (pivot " << j << " = " << d << ")";
      throw FactorizationError(j, os.str());
    }
    const double gjj = std::sqrt(d);
    g(j, j) = gjj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = 0.5 * (s(i, j) + s(j, i));
      for (std::size_t k = 0; k < j; ++k) acc -= g(i, k) * g(j, k);
      g(i, j) = acc / gjj;
    }
  }
  return g;
}

double log_det_pd(const Matrix& s) {
  const Matrix g = cholesky(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) acc += std::log(g(i, i));
  return 2.0 * acc;
}

Matrix inv_sqrt_sym(const Matrix& s) {
  const EigResult eig = eig_sym(s);
  const std::size_t n = s.rows();
  const double top = eig.values.back();
  if (!(top > 0.0)) throw SingularError("inv_sqrt_sym: matrix has no positive eigenvalue");
  for (double lam : eig.values) {
    if (lam <= 1e-12 * top) {
      std::ostringstream os;
      os << "inv_sqrt_sym: eigenvalue " << lam << " is singular relative to " << top;
      throw SingularError(os.str());
    }
  }
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 1.0 / std::sqrt(eig.values[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.vectors(i, k) * w;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
    }
  }
  return out.symmetrized();
}

Vector cholesky_solve(const Matrix& g, std::span<const double> b) {
  if (g.rows() != b.size()) throw DimensionError("solve: right-hand side length mismatch");
  Vector x(b.begin(), b.end());
  forward_subst(g, x);
  back_subst_transposed(g, x);
  return x;
}

Vector solve(const Matrix& s, std::span<const double> b) {
  require_square(s, "solve");
  if (s.rows() != b.size()) throw DimensionError("solve: right-hand side length mismatch");
  return cholesky_solve(cholesky(s), b);
}

Matrix solve(const Matrix& s, const Matrix& b) {
  require_square(s, "solve");
  if (s.rows() != b.rows()) throw DimensionError("solve: right-hand side rows mismatch");
  const Matrix g = cholesky(s);
  Matrix out(b.rows(), b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) out.set_col(c, cholesky_solve(g, b.col(c)));
  return out;
}

Vector least_squares(const Matrix& x, std::span<const double> y) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols() + 1;
  if (y.size() != n) throw DimensionError("least_squares: target length mismatch");
  if (n < p) {
    std::ostringstream os;
    os << "least_squares: underdetermined system (" << n << " rows for " << p << " coefficients)";
    throw DimensionError(os.str());
  }
  Matrix normal(p, p);
  Vector rhs(p, 0.0);
  std::vector<double> row(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j + 1 < p; ++j) row[j] = x(i, j);
    row[p - 1] = 1.0;
    for (std::size_t a = 0; a < p; ++a) {
      rhs[a] += row[a] * y[i];
      for (std::size_t b = 0; b < p; ++b) normal(a, b) += row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a) normal(a, a) += 1e-10;
  return solve(normal, rhs);
}

}  // namespace tcoh::linalg
