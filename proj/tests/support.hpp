// tests/support.hpp

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

// Small fixtures shared by the unit tests.

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pced/dataset.hpp"
#include "pced/linalg.hpp"
#include "pced/matrix.hpp"
#include "pced/random.hpp"

namespace pced::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

inline Trial random_trial(Rng& rng, std::size_t channels, std::size_t time,
                          double scale = 1.0) {
  std::normal_distribution<float> normal(0.0f, static_cast<float>(scale));
  Trial t(channels, time);
  for (float& v : t.values()) v = normal(rng);
  return t;
}

inline Matrix to_matrix(const Trial& t) {
  Matrix m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.size(); ++i) m.values()[i] = t.values()[i];
  return m;
}

/// G G^T / n + shift * I.
inline Matrix random_spd(Rng& rng, std::size_t n, double shift = 0.5) {
  const Matrix g = random_matrix(rng, n, n);
  Matrix a = linalg::scale(linalg::matmul(g, linalg::transpose(g)), 1.0 / n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
  return a;
}

inline Matrix random_symmetric(Rng& rng, std::size_t n) {
  const Matrix g = random_matrix(rng, n, n);
  return linalg::scale(linalg::add(g, linalg::transpose(g)), 0.5);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  }
  return m;
}

inline double identity_error(const Matrix& a) {
  return linalg::frobenius_norm(linalg::subtract(a, Matrix::identity(a.rows())));
}

/// A small stream that trains in well under a second per run.
inline StreamConfig small_stream_config(int n_subjects = 3) {
  StreamConfig c;
  c.n_subjects = n_subjects;
  c.n_channels = 4;
  c.n_timepoints = 24;
  c.trials_per_subject = 40;
  c.seed = 11;
  return c;
}

/// Temporary directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pced_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pced::testing
