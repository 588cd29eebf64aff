#pragma once

#include <cstddef>
#include <vector>

namespace tabprof {

/// Dense row-major matrix. Sized for meta-feature work (hundreds of columns),
/// not for large-scale numerics.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

/// X^T X for a row-major data matrix.
Matrix gram(const Matrix& x);

/// Solves A w = b for symmetric positive-definite A by Cholesky
/// factorization. Throws DegenerateTraining when A is not SPD.
std::vector<double> cholesky_solve(Matrix a, std::vector<double> b);

struct JacobiOptions {
  double off_diagonal_tolerance = 1e-12;  // Frobenius norm of off-diagonal
  int max_sweeps = 100;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, returned in
/// descending order. Deterministic: fixed (p, q) sweep order, no pivot
/// search.
std::vector<double> jacobi_eigenvalues(Matrix symmetric,
                                       const JacobiOptions& opt = {});

}  // namespace tabprof
