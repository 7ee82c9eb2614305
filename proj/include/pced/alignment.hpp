// pced/alignment.hpp

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

// Euclidean alignment: each subject's trials are whitened by the inverse
// square root of that subject's mean trial covariance, so every aligned
// subject has (approximately) identity mean covariance.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pced/matrix.hpp"

namespace pced::alignment {

/// Condition numbers above this only produce a warning on stderr.
inline constexpr double kConditionWarning = 1e8;

struct AlignmentReport {
  Matrix reference_covariance;
  Matrix whitener;
  /// max(lambda) / max(min(lambda), floor) of the reference covariance.
  double condition_number = 1.0;
  bool eigenvalue_floor_applied = false;
};

struct AlignedTrials {
  std::vector<Trial> trials;
  AlignmentReport report;
};

/// Elementwise mean of the per-trial covariances, accumulated in input order.
/// Throws EmptyInputError on an empty list, ShapeError on mixed channel counts.
Matrix reference_covariance(std::span<const Trial> trials);

/// Computes the reference covariance and its whitener without touching the
/// trials themselves.
AlignmentReport fit(std::span<const Trial> trials,
                    std::optional<double> eps = std::nullopt);

/// whitener * trial, computed in 64-bit and stored back as 32-bit.
Trial apply(const Matrix& whitener, const Trial& trial);

AlignedTrials align_subject(std::span<const Trial> trials,
                            std::optional<double> eps = std::nullopt);

}  // namespace pced::alignment
