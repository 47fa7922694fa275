#pragma once

// Independent reference computations for the unit tests. Nothing here calls
// the library's numerical routines.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid minor_of(const Grid& a, std::size_t row, std::size_t col) {
  Grid m;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i == row) continue;
    std::vector<double> r;
    for (std::size_t j = 0; j < a.size(); ++j)
      if (j != col) r.push_back(a[i][j]);
    m.push_back(r);
  }
  return m;
}

// Laplace expansion along the first row.
inline double cofactor_det(const Grid& a) {
  if (a.size() == 1) return a[0][0];
  double det = 0.0, sign = 1.0;
  for (std::size_t j = 0; j < a.size(); ++j, sign = -sign) det += sign * a[0][j] * cofactor_det(minor_of(a, 0, j));
  return det;
}

// Roots of det(a - lambda b) in [lo, hi] by a sign-change scan plus bisection.
inline std::vector<double> generalized_roots(const Grid& a, const Grid& b, double lo, double hi, double step) {
  auto f = [&](double lam) {
    Grid m = a;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) m[i][j] -= lam * b[i][j];
    return cofactor_det(m);
  };
  std::vector<double> roots;
  double x0 = lo, f0 = f(lo);
  for (double x1 = lo + step; x1 <= hi; x1 += step) {
    const double f1 = f(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if ((f0 < 0.0) != (f1 < 0.0)) {
      double l = x0, r = x1, fl = f0;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (l + r), fm = f(m);
        if ((fm < 0.0) == (fl < 0.0)) {
          l = m;
          fl = fm;
        } else {
          r = m;
        }
      }
      roots.push_back(0.5 * (l + r));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

// Six nested loops; zero padding of `pad` on each side.
inline std::vector<double> naive_conv(const std::vector<double>& x, std::size_t cin, std::size_t h, std::size_t w,
                                      const std::vector<double>& k, const std::vector<double>& bias,
                                      std::size_t cout, std::size_t ks, std::size_t pad) {
  const std::size_t oh = h + 2 * pad - ks + 1, ow = w + 2 * pad - ks + 1;
  std::vector<double> y(cout * oh * ow);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t c = 0; c < ow; ++c) {
        double s = bias[o];
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t u = 0; u < ks; ++u)
            for (std::size_t v = 0; v < ks; ++v) {
              const long ir = static_cast<long>(r + u) - static_cast<long>(pad);
              const long ic = static_cast<long>(c + v) - static_cast<long>(pad);
              if (ir < 0 || ic < 0 || ir >= static_cast<long>(h) || ic >= static_cast<long>(w)) continue;
              s += k[((o * cin + i) * ks + u) * ks + v] * x[(i * h + ir) * w + ic];
            }
        y[(o * oh + r) * ow + c] = s;
      }
  return y;
}

// Chain objective for a one-dimensional embedding straight from the pair
// distribution: sum_ij p_ij (y_j - y_i)^2 - log var_p(y).
inline double chain_objective_1d(const Grid& pairs, const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> p(n, 0.0);
  double smooth = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      smooth += pairs[i][j] * (y[j] - y[i]) * (y[j] - y[i]);
      p[i] += 0.5 * (pairs[i][j] + pairs[j][i]);
    }
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += p[i] * y[i];
  for (std::size_t i = 0; i < n; ++i) sq += p[i] * (y[i] - mean) * (y[i] - mean);
  return smooth - std::log(sq);
}

// Gradient descent with numeric gradients and backtracking from several
// random starts; returns the best point found.
inline std::vector<double> brute_force_minimize(const std::function<double(const std::vector<double>&)>& f,
                                                std::size_t dim, unsigned seed, int starts = 8,
                                                int iterations = 20000) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> best;
  double best_f = INFINITY;
  for (int s = 0; s < starts; ++s) {
    std::vector<double> y(dim);
    for (double& v : y) v = nd(gen);
    double fy = f(y), step = 0.1;
    for (int it = 0; it < iterations && step > 1e-16; ++it) {
      std::vector<double> g(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        std::vector<double> up = y, dn = y;
        up[i] += 1e-7;
        dn[i] -= 1e-7;
        g[i] = (f(up) - f(dn)) / 2e-7;
      }
      while (step > 1e-16) {
        std::vector<double> trial = y;
        for (std::size_t i = 0; i < dim; ++i) trial[i] -= step * g[i];
        const double ft = f(trial);
        if (std::isfinite(ft) && ft < fy) {
          y = trial;
          fy = ft;
          step *= 1.5;
          break;
        }
        step *= 0.5;
      }
    }
    if (fy < best_f) {
      best_f = fy;
      best = y;
    }
  }
  return best;
}

}  // namespace oracle
