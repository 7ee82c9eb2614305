// alignment.cpp

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

#include "pced/alignment.hpp"

#include <algorithm>
#include <iostream>

#include "pced/linalg.hpp"

namespace pced::alignment {

Matrix reference_covariance(std::span<const Trial> trials) {
  if (trials.empty()) {
    throw EmptyInputError("reference_covariance: no trials");
  }
  const std::size_t channels = trials.front().rows();
  Matrix sum(channels, channels);
  for (const Trial& trial : trials) {
    if (trial.rows() != channels) {
      throw ShapeError("reference_covariance: trial has " +
                       std::to_string(trial.rows()) + " channels, expected " +
                       std::to_string(channels));
    }
    const Matrix cov = linalg::covariance(trial);
    auto s = sum.values();
    auto c = cov.values();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += c[i];
  }
  return linalg::scale(sum, 1.0 / static_cast<double>(trials.size()));
}

AlignmentReport fit(std::span<const Trial> trials, std::optional<double> eps) {
  AlignmentReport report;
  report.reference_covariance = reference_covariance(trials);
  linalg::InvSqrtResult w =
      linalg::inv_sqrt_detailed(report.reference_covariance, eps);
  report.whitener = std::move(w.inv_sqrt);
  report.eigenvalue_floor_applied = w.floor_applied;
  const double top = w.eigenvalues.back();
  const double bottom = std::max(w.eigenvalues.front(), w.floor);
  report.condition_number = std::max(1.0, std::max(top, w.floor) / bottom);
  if (report.condition_number > kConditionWarning) {
    std::cerr << "warning: reference covariance is ill-conditioned (condition "
                 "number "
              << report.condition_number << ")\n";
  }
  return report;
}

Trial apply(const Matrix& whitener, const Trial& trial) {
  const std::size_t channels = trial.rows();
  const std::size_t time = trial.cols();
  if (whitener.rows() != channels || whitener.cols() != channels) {
    throw ShapeError("alignment::apply: whitener is " +
                     std::to_string(whitener.rows()) + "x" +
                     std::to_string(whitener.cols()) + " but trial has " +
                     std::to_string(channels) + " channels");
  }
  std::vector<double> acc(time);
  Trial out(channels, time);
  for (std::size_t r = 0; r < channels; ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < channels; ++k) {
      const double w = whitener(r, k);
      auto src = trial.row(k);
      for (std::size_t t = 0; t < time; ++t) {
        acc[t] += w * static_cast<double>(src[t]);
      }
    }
    auto dst = out.row(r);
    for (std::size_t t = 0; t < time; ++t) dst[t] = static_cast<float>(acc[t]);
  }
  return out;
}

AlignedTrials align_subject(std::span<const Trial> trials,
                            std::optional<double> eps) {
  AlignedTrials out;
  out.report = fit(trials, eps);
  out.trials.reserve(trials.size());
  for (const Trial& t : trials) out.trials.push_back(apply(out.report.whitener, t));
  return out;
}

}  // namespace pced::alignment
