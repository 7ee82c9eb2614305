// pced/classifier.hpp

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

// Two small trial classifiers with hand-written backpropagation:
//
//   mlp           flatten -> [dense -> ELU]* -> dense
//   shallow_conv  temporal conv (filters x kernel) -> dense over
//                 (filter, channel) -> square -> mean over time -> log -> dense
//
// Both optionally carry an auxiliary subject-prediction head fed from the
// same feature vector as the class head. Its cross-entropy is added to the
// class loss with weight `aux_weight`.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pced/dataset.hpp"
#include "pced/matrix.hpp"

namespace pced::nn {

enum class Architecture { kMlp, kShallowConv };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& name);

struct ModelConfig {
  Architecture architecture = Architecture::kShallowConv;
  int n_channels = 8;
  int n_timepoints = 64;
  int n_classes = 2;
  std::vector<int> hidden = {32};  // mlp only
  int n_filters = 4;               // shallow_conv temporal filters
  int n_spatial = 8;               // shallow_conv spatial filters
  int kernel_length = 9;           // shallow_conv, along time
  int aux_subject_classes = 0;     // 0 disables the subject head
  double aux_weight = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One named block of the flat parameter vector, viewed as rows x cols.
struct LayerSlot {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const LayerSlot&) const = default;
};

struct Params {
  std::vector<double> values;
  std::vector<LayerSlot> layout;

  std::span<double> slot(const std::string& name);
  std::span<const double> slot(const std::string& name) const;
  bool same_layout(const Params& other) const { return layout == other.layout; }
  bool operator==(const Params&) const = default;
};

/// Loss = mean cross-entropy (plus weighted subject cross-entropy when the
/// auxiliary head is enabled).
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<LayerSlot>& layout() const noexcept { return layout_; }
  std::size_t parameter_count() const noexcept { return n_params_; }

  /// Glorot-uniform weights from config().seed, zero biases.
  Params init() const;

  /// Class logits, batch x n_classes.
  Matrix forward(const Params& params, std::span<const Trial> batch) const;

  /// Mean loss over the batch.
  double loss(const Params& params, std::span<const LabeledTrial> batch) const;

  /// Gradient of loss() with respect to every parameter.
  std::vector<double> gradient(const Params& params,
                               std::span<const LabeledTrial> batch) const;

  /// Per-sample gradient of the class cross-entropy only.
  std::vector<double> sample_class_gradient(const Params& params,
                                            const LabeledTrial& sample) const;

  /// Adds `weight` * d(loss_i)/d(params) into `grad` for every sample and
  /// returns the summed per-sample loss. Internal workhorse of training.
  double accumulate(const Params& params,
                    std::span<const LabeledTrial* const> batch,
                    std::span<double> grad, double weight,
                    bool include_aux = true) const;

  std::vector<int> predict(const Params& params,
                           std::span<const LabeledTrial> set) const;

 private:
  void check_params(const Params& params) const;
  void check_trial(const Trial& trial) const;

  ModelConfig config_;
  std::vector<LayerSlot> layout_;
  std::size_t n_params_ = 0;
};

/// Mean over rows of -log softmax(logits)[label], stabilized by subtracting
/// the row maximum. Throws RangeError on a label outside [0, cols).
double cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> row);

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  double learning_rate = 0.001;
  int max_epochs = 200;
  int batch_size = 32;
  int patience = 20;
  std::uint64_t shuffle_seed = 1;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  int best_epoch = 0;  // 0-based

  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  Params params;
  TrainHistory history;
};

/// Extra objective term. Receives the current parameters, adds its gradient
/// into `grad` and returns its scalar value.
using PenaltyHook =
    std::function<double(std::span<const double> params, std::span<double> grad)>;

/// Minibatch training with per-epoch reshuffling and early stopping on
/// validation accuracy. Returns the parameters of the best validation epoch
/// (earliest on ties). Throws NumericalError if the loss stops being finite.
TrainResult train(const Model& model, Params init,
                  std::span<const LabeledTrial> train_set,
                  std::span<const LabeledTrial> val_set, const TrainConfig& cfg,
                  const PenaltyHook& penalty = {});

/// Fraction of argmax-correct predictions. Throws EmptyInputError on an empty set.
double evaluate(const Model& model, const Params& params,
                std::span<const LabeledTrial> set);

std::vector<std::uint8_t> encode_params(const Params& params);
Params decode_params(std::span<const std::uint8_t> bytes);

}  // namespace pced::nn
