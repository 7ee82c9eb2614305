// pced/ewc.hpp

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

// Elastic weight consolidation with a diagonal empirical Fisher and a single
// running anchor (online variant: Fisher diagonals of successive subjects are
// summed).

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pced/classifier.hpp"

namespace pced::ewc {

inline constexpr double kDefaultLambda = 100.0;

struct FisherAnchor {
  nn::Params anchor;
  std::vector<double> fisher;
  double lambda = kDefaultLambda;
};

/// Mean over samples of the squared per-sample gradient of the class
/// cross-entropy.
std::vector<double> fisher_diagonal(const nn::Model& model, const nn::Params& params,
                                    std::span<const LabeledTrial> dataset);

/// (lambda / 2) * sum_i F_i (theta_i - anchor_i)^2 and its gradient.
std::pair<double, std::vector<double>> penalty(const nn::Params& params,
                                               const FisherAnchor& anchor);

/// Same as penalty() but adds the gradient into `grad`; usable as a
/// training PenaltyHook.
double add_penalty(std::span<const double> params, const FisherAnchor& anchor,
                   std::span<double> grad);

/// Folds a freshly trained subject into the anchor: the anchor moves to
/// `params` and `fisher` is added to the accumulated diagonal.
void consolidate(FisherAnchor& anchor, const nn::Params& params,
                 const std::vector<double>& fisher);

}  // namespace pced::ewc
