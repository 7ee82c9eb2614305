// linalg.cpp

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

#include "pced/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pced::linalg {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kJacobiTolerance = 1e-12;

template <typename T>
Matrix covariance_impl(const BasicMatrix<T>& x) {
  const std::size_t channels = x.rows();
  const std::size_t time = x.cols();
  if (time < 2) {
    throw DegenerateInputError("covariance needs at least 2 time points, got " +
                               std::to_string(time));
  }
  Matrix centered(channels, time);
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < time; ++t) mean += static_cast<double>(x(c, t));
    mean /= static_cast<double>(time);
    for (std::size_t t = 0; t < time; ++t) {
      centered(c, t) = static_cast<double>(x(c, t)) - mean;
    }
  }
  const double divisor = static_cast<double>(time - 1);
  Matrix cov(channels, channels);
  for (std::size_t i = 0; i < channels; ++i) {
    auto ri = centered.row(i);
    for (std::size_t j = i; j < channels; ++j) {
      auto rj = centered.row(j);
      double s = 0.0;
      for (std::size_t t = 0; t < time; ++t) s += ri[t] * rj[t];
      cov(i, j) = s / divisor;
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

void require_square(const Matrix& a, const char* what) {
  if (!a.is_square()) {
    throw ShapeError(std::string(what) + ": expected a square matrix, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

}  // namespace

Matrix covariance(const Trial& trial) { return covariance_impl(trial); }
Matrix covariance(const Matrix& trial) { return covariance_impl(trial); }

SymEigResult sym_eig(const Matrix& input) {
  require_square(input, "sym_eig");
  const std::size_t n = input.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = 0.5 * (input(i, j) + input(j, i));
    }
  }
  Matrix v = Matrix::identity(n);

  const double norm = frobenius_norm(a);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= kJacobiTolerance * norm) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) /
              (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return a(l, l) < a(r, r);
  });
  SymEigResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    result.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) {
      result.eigenvectors(i, k) = v(i, order[k]);
    }
  }
  return result;
}

double default_eig_floor(const std::vector<double>& ascending_eigenvalues) {
  const double top =
      ascending_eigenvalues.empty() ? 1.0 : ascending_eigenvalues.back();
  return 1e-10 * std::max(top, 1.0);
}

InvSqrtResult inv_sqrt_detailed(const Matrix& a, std::optional<double> eps) {
  require_square(a, "inv_sqrt");
  if (eps && !(*eps > 0.0)) throw RangeError("inv_sqrt: eps must be positive");
  SymEigResult eig = sym_eig(a);
  InvSqrtResult out;
  out.floor = eps ? *eps : default_eig_floor(eig.eigenvalues);
  const std::size_t n = a.rows();
  std::vector<double> weights(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lambda = eig.eigenvalues[k];
    if (lambda < out.floor) {
      lambda = out.floor;
      out.floor_applied = true;
    }
    weights[k] = 1.0 / std::sqrt(lambda);
  }
  Matrix w(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.eigenvectors(i, k) * weights[k];
      for (std::size_t j = 0; j < n; ++j) {
        w(i, j) += vik * eig.eigenvectors(j, k);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (w(i, j) + w(j, i));
      w(i, j) = m;
      w(j, i) = m;
    }
  }
  out.inv_sqrt = std::move(w);
  out.eigenvalues = std::move(eig.eigenvalues);
  return out;
}

Matrix inv_sqrt(const Matrix& a, std::optional<double> eps) {
  return inv_sqrt_detailed(a, eps).inv_sqrt;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch");
  }
}
}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double asymmetry(const Matrix& a) {
  require_square(a, "asymmetry");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
    }
  }
  return worst;
}

}  // namespace pced::linalg
