// ewc.cpp

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

#include "pced/ewc.hpp"

namespace pced::ewc {

std::vector<double> fisher_diagonal(const nn::Model& model, const nn::Params& params,
                                    std::span<const LabeledTrial> dataset) {
  if (dataset.empty()) throw EmptyInputError("fisher_diagonal: empty dataset");
  std::vector<double> fisher(params.values.size(), 0.0);
  for (const LabeledTrial& sample : dataset) {
    const std::vector<double> g = model.sample_class_gradient(params, sample);
    for (std::size_t i = 0; i < g.size(); ++i) fisher[i] += g[i] * g[i];
  }
  const double n = static_cast<double>(dataset.size());
  for (double& f : fisher) f /= n;
  return fisher;
}

double add_penalty(std::span<const double> params, const FisherAnchor& anchor,
                   std::span<double> grad) {
  if (params.size() != anchor.anchor.values.size() ||
      anchor.fisher.size() != params.size() || grad.size() != params.size()) {
    throw ShapeError("ewc penalty: parameter layouts do not match");
  }
  if (anchor.lambda == 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = params[i] - anchor.anchor.values[i];
    total += anchor.fisher[i] * d * d;
    grad[i] += anchor.lambda * anchor.fisher[i] * d;
  }
  return 0.5 * anchor.lambda * total;
}

std::pair<double, std::vector<double>> penalty(const nn::Params& params,
                                               const FisherAnchor& anchor) {
  if (!params.same_layout(anchor.anchor)) {
    throw ShapeError("ewc penalty: parameter layouts do not match");
  }
  std::vector<double> grad(params.values.size(), 0.0);
  const double value = add_penalty(params.values, anchor, grad);
  return {value, std::move(grad)};
}

void consolidate(FisherAnchor& anchor, const nn::Params& params,
                 const std::vector<double>& fisher) {
  if (fisher.size() != params.values.size()) {
    throw ShapeError("ewc consolidate: fisher size does not match parameters");
  }
  if (anchor.fisher.empty()) anchor.fisher.assign(fisher.size(), 0.0);
  if (anchor.fisher.size() != fisher.size()) {
    throw ShapeError("ewc consolidate: accumulated fisher has a different size");
  }
  for (std::size_t i = 0; i < fisher.size(); ++i) anchor.fisher[i] += fisher[i];
  anchor.anchor = params;
}

}  // namespace pced::ewc
