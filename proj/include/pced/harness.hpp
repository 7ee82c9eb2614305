// pced/harness.hpp

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

// Subject-incremental training loop and its metrics.
//
// Stage k sees only subject k's dataset plus the replay memory. Each subject's
// test split is captured (and, with alignment, whitened by that subject's own
// training-split whitener) when the subject arrives, and later stages
// evaluate on these captured copies.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pced/classifier.hpp"
#include "pced/dataset.hpp"
#include "pced/ewc.hpp"
#include "pced/replay.hpp"

namespace pced::harness {

enum class StrategyKind { kSft, kEr, kEwc, kPced };

std::string to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& name);

struct MemoryConfig {
  std::size_t capacity = 200;
  std::size_t per_class = 10;
  replay::Policy policy = replay::Policy::kClassBalanced;
};

struct Strategy {
  StrategyKind kind = StrategyKind::kSft;
  bool alignment_enabled = false;
  std::optional<MemoryConfig> memory;
  std::optional<double> ewc_lambda;

  static Strategy sft();
  static Strategy er(MemoryConfig memory = {});
  static Strategy ewc(double lambda = ewc::kDefaultLambda);
  static Strategy pced(MemoryConfig memory = {});

  /// SFT: no memory, no EWC. ER: memory, no alignment. EWC: lambda, no
  /// memory. PCED: memory and alignment. Throws ConfigError otherwise.
  void validate() const;
};

/// a(j, i): accuracy on subject i's test split after training on subject j
/// (both 0-based). Only j >= i is ever defined.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  void set(std::size_t stage, std::size_t subject, double accuracy);
  bool defined(std::size_t stage, std::size_t subject) const;
  /// Throws UndefinedMetricError for an undefined cell.
  double at(std::size_t stage, std::size_t subject) const;

  bool operator==(const AccuracyMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> defined_;
};

/// (1 / (N - 1)) * sum_{i < N} (a(N, i) - a(i, i)). Throws
/// UndefinedMetricError for N < 2 or missing cells.
double bwt(const AccuracyMatrix& m);

/// Mean of the last row. Throws UndefinedMetricError if it is incomplete.
double final_acc(const AccuracyMatrix& m);

struct CurvePoint {
  std::size_t stage;  // 1-based
  double accuracy;
};

/// Accuracy on subject `subject` (1-based) at every stage from its arrival
/// to the end of the stream.
std::vector<CurvePoint> forgetting_curve(const AccuracyMatrix& m, std::size_t subject);

/// Records which subjects' raw datasets are read during which stage.
class AccessAudit {
 public:
  void begin_stage(std::size_t stage) { stage_ = stage; }
  void record_read(std::size_t subject_index);

  std::size_t stage() const noexcept { return stage_; }
  /// Reads of a subject earlier than the stage that read it.
  std::size_t violations() const noexcept { return violations_; }
  std::size_t total_reads() const noexcept { return total_reads_; }
  const std::vector<std::size_t>& reads_by_subject() const noexcept { return reads_; }

 private:
  std::size_t stage_ = 0;
  std::size_t violations_ = 0;
  std::size_t total_reads_ = 0;
  std::vector<std::size_t> reads_;
};

/// The only route by which a stage reaches a subject's raw trials.
class SubjectAccess {
 public:
  SubjectAccess(const SubjectDataset& dataset, std::size_t index, AccessAudit* audit)
      : dataset_(&dataset), index_(index), audit_(audit) {}

  std::vector<LabeledTrial> subset(Split split) const;
  int subject_id() const noexcept { return dataset_->subject_id; }
  int n_classes() const noexcept { return dataset_->n_classes; }

 private:
  const SubjectDataset* dataset_;
  std::size_t index_;
  AccessAudit* audit_;
};

struct RunSeeds {
  std::uint64_t stream = 0;
  std::uint64_t model = 0;
  std::uint64_t train = 0;

  bool operator==(const RunSeeds&) const = default;
};

struct RunRecord {
  Strategy strategy;
  RunSeeds seeds;
  std::string architecture;
  AccuracyMatrix matrix;
  std::vector<double> stage_seconds;
  std::vector<std::size_t> memory_occupancy;
  std::vector<int> epochs_trained;
  std::vector<double> condition_numbers;  // alignment only
  double acc = 0.0;
  std::optional<double> bwt;  // empty for a single-subject stream
  nn::Params final_params;
};

RunRecord run_continual(std::span<const SubjectDataset> stream,
                        const Strategy& strategy, const nn::ModelConfig& model_cfg,
                        const nn::TrainConfig& train_cfg, const RunSeeds& seeds,
                        AccessAudit* audit = nullptr);

/// JSON report. Wall-time lives in "stage_seconds" and "wall_seconds".
nlohmann::ordered_json to_json(const RunRecord& record);

/// Strategy, seeds and accuracy matrix recovered from a report.
struct ReportSummary {
  std::string strategy;
  RunSeeds seeds;
  AccuracyMatrix matrix;
  double acc = 0.0;
  std::optional<double> bwt;
};
ReportSummary summary_from_json(const nlohmann::json& report);

/// N x N CSV, undefined cells left blank.
std::string matrix_csv(const AccuracyMatrix& m);

}  // namespace pced::harness
