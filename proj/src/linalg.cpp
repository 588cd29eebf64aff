#include "tabprof/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "tabprof/error.hpp"
#include "tabprof/stats.hpp"

namespace tabprof {

Matrix gram(const Matrix& x) {
  // Entry-wise stable sums keep the result invariant under row permutation.
  Matrix g(x.cols, x.cols);
  for (std::size_t j = 0; j < x.cols; ++j) {
    for (std::size_t k = j; k < x.cols; ++k) {
      StableAccumulator acc;
      for (std::size_t i = 0; i < x.rows; ++i) {
        acc.add(x.at(i, j) * x.at(i, k));
      }
      g.at(j, k) = acc.total();
      g.at(k, j) = g.at(j, k);
    }
  }
  return g;
}

std::vector<double> cholesky_solve(Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.size() != n) {
    fail(errc::invalid_argument, "cholesky_solve shape");
  }
  // In-place lower Cholesky.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
    if (!(d > 0.0)) {
      fail(errc::degenerate_training,
           "normal equations are not positive definite");
    }
    const double l = std::sqrt(d);
    a.at(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
      a.at(i, j) = s / l;
    }
  }
  // Forward then backward substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a.at(i, k) * b[k];
    b[i] = s / a.at(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a.at(k, ii) * b[k];
    b[ii] = s / a.at(ii, ii);
  }
  return b;
}

namespace {

double off_diagonal_frobenius(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (i != j) s += m.at(i, j) * m.at(i, j);
    }
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<double> jacobi_eigenvalues(Matrix m, const JacobiOptions& opt) {
  const std::size_t n = m.rows;
  if (m.cols != n) fail(errc::invalid_argument, "jacobi needs square matrix");
  if (n == 0) return {};
  if (n == 1) return {m.at(0, 0)};

  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    if (off_diagonal_frobenius(m) < opt.off_diagonal_tolerance) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double app = m.at(p, p);
        const double aqq = m.at(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        // Smaller-angle rotation root, sign chosen for stability.
        double t = 1.0 /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        m.at(p, p) = app - t * apq;
        m.at(q, q) = aqq + t * apq;
        m.at(p, q) = 0.0;
        m.at(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = m.at(r, p);
          const double arq = m.at(r, q);
          m.at(r, p) = arp - s * (arq + tau * arp);
          m.at(p, r) = m.at(r, p);
          m.at(r, q) = arq + s * (arp - tau * arq);
          m.at(q, r) = m.at(r, q);
        }
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = m.at(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<double>());
  return eig;
}

}  // namespace tabprof
