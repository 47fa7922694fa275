#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tcoh/error.hpp"
#include "tcoh/linalg.hpp"

using namespace tcoh;
using namespace tcoh::linalg;
using testutil::max_abs_diff;

namespace {

oracle::Grid to_grid(const Matrix& m) {
  oracle::Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

double eig_residual(const Matrix& s, const EigResult& e, std::size_t k) {
  const Vector v = e.vectors.col(k);
  Vector r = s * v;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= e.values[k] * v[i];
  return norm2(r);
}

}  // namespace

TEST_CASE("eig_sym on identity and diagonal") {
  const EigResult id = eig_sym(Matrix::identity(3));
  CHECK(id.values == Vector{1.0, 1.0, 1.0});

  const EigResult diag = eig_sym(Matrix{{3, 0, 0}, {0, 1, 0}, {0, 0, 2}});
  CHECK(diag.values[0] == doctest::Approx(1.0));
  CHECK(diag.values[1] == doctest::Approx(2.0));
  CHECK(diag.values[2] == doctest::Approx(3.0));
}

TEST_CASE("eig_sym analytic 2x2") {
  const EigResult e = eig_sym(Matrix{{2, 1}, {1, 2}});
  CHECK(std::abs(e.values[0] - 1.0) < 1e-14);
  CHECK(std::abs(e.values[1] - 3.0) < 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  // largest-magnitude component is made positive; ties keep the first one.
  CHECK(std::abs(std::abs(e.vectors(0, 0)) - r) < 1e-14);
  CHECK(std::abs(e.vectors(0, 0) + e.vectors(1, 0)) < 1e-14);
  CHECK(std::abs(e.vectors(0, 1) - r) < 1e-14);
  CHECK(std::abs(e.vectors(1, 1) - r) < 1e-14);
}

TEST_CASE("eig_sym rejects bad input") {
  CHECK_THROWS_AS(eig_sym(Matrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(eig_sym(Matrix{{1, 2}, {0, 1}}), SymmetryError);
}

TEST_CASE("eig_sym residual, orthonormality, reconstruction and trace on random input") {
  std::mt19937_64 gen(11);
  for (std::size_t n : {1u, 2u, 5u, 12u, 30u, 50u}) {
    const Matrix s = testutil::random_symmetric(n, gen);
    const EigResult e = eig_sym(s);
    const double fro = s.frobenius_norm();
    for (std::size_t k = 0; k + 1 < n; ++k) CHECK(e.values[k] <= e.values[k + 1]);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, eig_residual(s, e, k));
    CHECK(worst <= 1e-10 * fro);

    const Matrix vtv = e.vectors.transpose() * e.vectors;
    CHECK(max_abs_diff(vtv, Matrix::identity(n)) < 1e-10);

    const Matrix recon = e.vectors * Matrix::diagonal(e.values) * e.vectors.transpose();
    CHECK((recon - s).frobenius_norm() <= 1e-9 * fro);

    double sum = 0.0;
    for (double v : e.values) sum += v;
    CHECK(std::abs(sum - s.trace()) < 1e-9);
  }
}

TEST_CASE("eig_sym is deterministic") {
  std::mt19937_64 gen(3);
  const Matrix s = testutil::random_symmetric(9, gen);
  const EigResult a = eig_sym(s), b = eig_sym(s);
  CHECK(a.values == b.values);
  CHECK(a.vectors == b.vectors);
}

TEST_CASE("eig_gen_sym trivial reductions") {
  const EigResult id = eig_gen_sym(Matrix::identity(2), Matrix::identity(2));
  CHECK(std::abs(id.values[0] - 1.0) < 1e-15);
  CHECK(std::abs(id.values[1] - 1.0) < 1e-15);

  std::mt19937_64 gen(5);
  const Matrix s = testutil::random_symmetric(6, gen);
  const EigResult g = eig_gen_sym(s, Matrix::identity(6));
  const EigResult e = eig_sym(s);
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(g.values[k] - e.values[k]) < 1e-12);
  CHECK(max_abs_diff(g.vectors, e.vectors) < 1e-10);
}

TEST_CASE("eig_gen_sym matches characteristic-polynomial roots") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix l = testutil::random_symmetric(4, gen);
    const Matrix d = testutil::random_spd(4, gen);
    const EigResult e = eig_gen_sym(l, d);
    const auto roots = oracle::generalized_roots(to_grid(l), to_grid(d), -5.0, 5.0, 1e-3);
    REQUIRE(roots.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(e.values[k] - roots[k]) < 1e-8);

    const Matrix gram = e.vectors.transpose() * d * e.vectors;
    CHECK(max_abs_diff(gram, Matrix::identity(4)) < 1e-9);
  }
}

TEST_CASE("eig_gen_sym reports the failing pivot") {
  const Matrix d{{1, 0, 0}, {0, 1, 0}, {0, 0, -1}};
  try {
    eig_gen_sym(Matrix::identity(3), d);
    FAIL("expected FactorizationError");
  } catch (const FactorizationError& e) {
    CHECK(e.pivot() == 2);
  }
}

TEST_CASE("cholesky examples") {
  CHECK(cholesky(Matrix::identity(2)) == Matrix::identity(2));
  CHECK(max_abs_diff(cholesky(Matrix{{4, 0}, {0, 9}}), Matrix{{2, 0}, {0, 3}}) < 1e-15);
  CHECK(max_abs_diff(cholesky(Matrix{{4, 2}, {2, 5}}), Matrix{{2, 0}, {1, 2}}) < 1e-15);
  try {
    cholesky(Matrix{{1, 2}, {2, 1}});
    FAIL("expected FactorizationError");
  } catch (const FactorizationError& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("cholesky reconstruction on random SPD") {
  std::mt19937_64 gen(23);
  for (std::size_t n : {1u, 3u, 8u, 20u}) {
    const Matrix s = testutil::random_spd(n, gen);
    const Matrix g = cholesky(s);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(g(i, i) > 0.0);
      for (std::size_t j = i + 1; j < n; ++j) CHECK(g(i, j) == 0.0);
    }
    CHECK((g * g.transpose() - s).frobenius_norm() <= 1e-12 * s.frobenius_norm());
  }
}

TEST_CASE("log_det_pd") {
  CHECK(log_det_pd(Matrix::identity(4)) == 0.0);
  const double e = std::numbers::e;
  CHECK(std::abs(log_det_pd(Matrix{{e, 0}, {0, e}}) - 2.0) < 1e-15);
  std::mt19937_64 gen(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix s = testutil::random_spd(3, gen);
    CHECK(std::abs(log_det_pd(s) - std::log(oracle::cofactor_det(to_grid(s)))) < 1e-10);
  }
  CHECK_THROWS_AS(log_det_pd(Matrix{{1, 0}, {0, -1}}), FactorizationError);
}

TEST_CASE("log_det_pd scaling property") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 6);
    const Matrix s = testutil::random_spd(n, gen);
    const double c = u(gen);
    CHECK(std::abs(log_det_pd(s * c) - (n * std::log(c) + log_det_pd(s))) < 1e-9);
  }
}

TEST_CASE("inv_sqrt_sym") {
  CHECK(max_abs_diff(inv_sqrt_sym(Matrix::identity(3)), Matrix::identity(3)) < 1e-15);
  CHECK(max_abs_diff(inv_sqrt_sym(Matrix{{4, 0}, {0, 16}}), Matrix{{0.5, 0}, {0, 0.25}}) < 1e-15);
  std::mt19937_64 gen(37);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix s = testutil::random_spd(3, gen);
    const Matrix r = inv_sqrt_sym(s);
    CHECK((r * s * r - Matrix::identity(3)).frobenius_norm() <= 1e-8);
  }
  CHECK_THROWS_AS(inv_sqrt_sym(Matrix{{1, 0}, {0, 0}}), SingularError);
}

TEST_CASE("solve") {
  const Vector b{3.0, -1.0, 2.0};
  const Vector x = solve(Matrix::identity(3), b);
  CHECK(x == b);
  const Vector y = solve(Matrix{{2, 0}, {0, 4}}, Vector{2.0, 8.0});
  CHECK(std::abs(y[0] - 1.0) < 1e-15);
  CHECK(std::abs(y[1] - 2.0) < 1e-15);
  CHECK_THROWS_AS(solve(Matrix{{-1, 0}, {0, 1}}, Vector{1, 1}), FactorizationError);
  CHECK_THROWS_AS(solve(Matrix::identity(2), Vector{1, 1, 1}), DimensionError);

  std::mt19937_64 gen(41);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = testutil::random_spd(5, gen);
    Vector rhs(5);
    for (double& v : rhs) v = nd(gen);
    const Vector sol = solve(s, rhs);
    Vector r = s * sol;
    for (std::size_t i = 0; i < 5; ++i) r[i] -= rhs[i];
    CHECK(norm2(r) <= 1e-10 * norm2(rhs));
  }
}

TEST_CASE("least_squares") {
  const Matrix x{{1}, {2}, {3}};
  const Vector beta = least_squares(x, Vector{2, 4, 6});
  CHECK(std::abs(beta[0] - 2.0) < 1e-8);
  CHECK(std::abs(beta[1]) < 1e-8);

  const Vector flat = least_squares(x, Vector{5, 5, 5});
  CHECK(std::abs(flat[0]) < 1e-8);
  CHECK(std::abs(flat[1] - 5.0) < 1e-8);

  CHECK_THROWS(least_squares(Matrix{{1, 2}, {3, 4}}, Vector{1, 2}));
}

TEST_CASE("least_squares matches simple-regression formula") {
  std::mt19937_64 gen(43);
  std::normal_distribution<double> nd(0.0, 0.3);
  const std::size_t n = 40;
  Matrix x(n, 1);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i) / 10.0;
    y[i] = 1.5 * x(i, 0) - 0.7 + nd(gen);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x(i, 0) / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x(i, 0) - mx) * (y[i] - my);
    sxx += (x(i, 0) - mx) * (x(i, 0) - mx);
  }
  const double slope = sxy / sxx, icpt = my - slope * mx;
  const Vector beta = least_squares(x, y);
  double res_lib = 0, res_oracle = 0;
  for (std::size_t i = 0; i < n; ++i) {
    res_lib += std::pow(y[i] - beta[0] * x(i, 0) - beta[1], 2);
    res_oracle += std::pow(y[i] - slope * x(i, 0) - icpt, 2);
  }
  CHECK(std::abs(res_lib - res_oracle) < 1e-10);
  CHECK(std::abs(beta[0] - slope) < 1e-8);
}

TEST_CASE("solve round-trips b") {
  std::mt19937_64 gen(47);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 10);
    const Matrix s = testutil::random_spd(n, gen);
    Vector b(n);
    for (double& v : b) v = nd(gen);
    const Vector back = s * solve(s, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(back[i] - b[i]) <= 1e-9 * norm2(b));
  }
}
