// pced/linalg.hpp

// Copyright 2026 The PCED Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <vector>

#include "pced/matrix.hpp"

namespace pced::linalg {

/// Eigenpairs of a symmetric matrix. Eigenvalues ascend; column i of
/// `eigenvectors` belongs to eigenvalues[i].
struct SymEigResult {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Sample covariance of a channels x time trial with divisor T - 1. Each
/// channel is centered on its own time mean. The result is exactly symmetric.
/// Throws DegenerateInputError when the trial has fewer than two time points.
Matrix covariance(const Trial& trial);
Matrix covariance(const Matrix& trial);

/// Cyclic Jacobi eigendecomposition. The input is symmetrized as (A + A^T) / 2
/// first. Converges when the off-diagonal Frobenius norm falls below
/// 1e-12 * ||A||_F, or after 100 sweeps.
SymEigResult sym_eig(const Matrix& a);

/// Default eigenvalue floor for inv_sqrt: 1e-10 * max(lambda_max, 1).
double default_eig_floor(const std::vector<double>& ascending_eigenvalues);

struct InvSqrtResult {
  Matrix inv_sqrt;
  std::vector<double> eigenvalues;  // unfloored, ascending
  double floor = 0.0;
  bool floor_applied = false;
};

/// V * diag(max(lambda, eps))^{-1/2} * V^T, plus the spectrum it came from.
/// When eps is not given the default floor is used.
InvSqrtResult inv_sqrt_detailed(const Matrix& a,
                                std::optional<double> eps = std::nullopt);

Matrix inv_sqrt(const Matrix& a, std::optional<double> eps = std::nullopt);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
double frobenius_norm(const Matrix& a);

/// Largest |a(i,j) - a(j,i)|. Throws ShapeError for non-square input.
double asymmetry(const Matrix& a);

/// V * diag(f(lambda)) * V^T for a symmetric matrix.
template <typename F>
Matrix sym_apply(const Matrix& a, F&& f) {
  SymEigResult eig = sym_eig(a);
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = f(eig.eigenvalues[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.eigenvectors(i, k) * w;
      for (std::size_t j = 0; j < n; ++j) {
        out(i, j) += vik * eig.eigenvectors(j, k);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = m;
      out(j, i) = m;
    }
  }
  return out;
}

}  // namespace pced::linalg
