// pced/experiment.hpp

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

// Experiment configuration and the `gen`, `run` and `report` commands.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numerical failure.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pced/classifier.hpp"
#include "pced/dataset.hpp"
#include "pced/harness.hpp"

namespace pced::experiment {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

struct ExperimentConfig {
  std::optional<std::filesystem::path> stream_path;
  std::optional<StreamConfig> stream_generator;
  std::vector<harness::StrategyKind> strategies;
  nn::ModelConfig model;
  nn::TrainConfig train;
  harness::MemoryConfig memory;
  double ewc_lambda = ewc::kDefaultLambda;
  std::vector<std::uint64_t> seeds = {1};
  std::filesystem::path output_dir = "runs";

  /// Throws ConfigError. Does not touch the filesystem.
  void validate() const;
};

StreamConfig stream_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const StreamConfig& config);

/// Relative stream paths resolve against `base_dir`.
ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir);

/// The harness strategy for `kind` under this experiment's memory and EWC
/// settings.
harness::Strategy make_strategy(harness::StrategyKind kind, const ExperimentConfig& cfg);

struct Aggregate {
  harness::StrategyKind strategy;
  double acc_mean = 0.0, acc_sd = 0.0;
  std::optional<double> bwt_mean, bwt_sd;
  std::size_t runs = 0;
};

/// Mean and sample standard deviation (0 for a single run) per strategy,
/// sorted by ACC mean, highest first.
std::vector<Aggregate> aggregate(const std::vector<harness::RunRecord>& records);

std::string summary_csv(const std::vector<Aggregate>& rows);
std::string summary_table(const std::vector<Aggregate>& rows);

/// Runs every (strategy, seed) pair on `stream`, using up to `jobs` worker
/// threads. Results are ordered strategy-major, seed-minor.
std::vector<harness::RunRecord> run_all(const Stream& stream, const ExperimentConfig& cfg,
                                        int jobs);

/// Forgetting-curve CSV for `subject` (1-based) averaged over seeds: column
/// "stage", then one column per strategy present.
std::string curve_csv(const std::vector<harness::ReportSummary>& reports,
                      std::size_t subject);

std::vector<harness::ReportSummary> load_reports(const std::filesystem::path& dir);

std::string report_file_name(harness::StrategyKind kind, std::uint64_t seed);
std::string matrix_file_name(harness::StrategyKind kind, std::uint64_t seed);
std::string curve_file_name(std::size_t subject);

int cmd_gen(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& config_path,
            const std::optional<std::filesystem::path>& out_dir, int jobs,
            std::ostream& out, std::ostream& err);
/// `curve` is "subject=I"; subject 1 when absent.
int cmd_report(const std::filesystem::path& run_dir, const std::optional<std::string>& curve,
               std::ostream& out, std::ostream& err);

}  // namespace pced::experiment
