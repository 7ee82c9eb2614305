// harness.cpp

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

#include "pced/harness.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "pced/alignment.hpp"
#include "pced/random.hpp"

namespace pced::harness {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kSft: return "SFT";
    case StrategyKind::kEr: return "ER";
    case StrategyKind::kEwc: return "EWC";
    case StrategyKind::kPced: return "PCED";
  }
  return "unknown";
}

StrategyKind strategy_from_string(const std::string& name) {
  if (name == "SFT") return StrategyKind::kSft;
  if (name == "ER") return StrategyKind::kEr;
  if (name == "EWC") return StrategyKind::kEwc;
  if (name == "PCED") return StrategyKind::kPced;
  throw ConfigError("unknown strategy '" + name + "' (expected SFT, ER, EWC or PCED)");
}

Strategy Strategy::sft() { return Strategy{StrategyKind::kSft, false, std::nullopt, std::nullopt}; }

Strategy Strategy::er(MemoryConfig memory) {
  return Strategy{StrategyKind::kEr, false, memory, std::nullopt};
}

Strategy Strategy::ewc(double lambda) {
  return Strategy{StrategyKind::kEwc, false, std::nullopt, lambda};
}

Strategy Strategy::pced(MemoryConfig memory) {
  return Strategy{StrategyKind::kPced, true, memory, std::nullopt};
}

void Strategy::validate() const {
  const std::string name = to_string(kind);
  auto need = [&](bool ok, const char* msg) {
    if (!ok) throw ConfigError(name + ": " + msg);
  };
  switch (kind) {
    case StrategyKind::kSft:
      need(!memory && !ewc_lambda && !alignment_enabled,
           "takes neither memory, EWC nor alignment");
      break;
    case StrategyKind::kEr:
      need(memory.has_value(), "needs a replay memory");
      need(!alignment_enabled && !ewc_lambda, "takes no alignment or EWC");
      break;
    case StrategyKind::kEwc:
      need(ewc_lambda.has_value() && *ewc_lambda >= 0.0, "needs lambda >= 0");
      need(!memory && !alignment_enabled, "takes no memory or alignment");
      break;
    case StrategyKind::kPced:
      need(memory.has_value() && alignment_enabled, "needs memory and alignment");
      need(!ewc_lambda, "takes no EWC");
      break;
  }
}

AccuracyMatrix::AccuracyMatrix(std::size_t n)
    : n_(n), values_(n * n, 0.0), defined_(n * n, 0) {}

void AccuracyMatrix::set(std::size_t stage, std::size_t subject, double accuracy) {
  if (stage >= n_ || subject > stage) {
    throw RangeError("accuracy cell (" + std::to_string(stage) + ", " +
                     std::to_string(subject) + ") outside the lower triangle");
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw RangeError("accuracy must lie in [0, 1]");
  }
  values_[stage * n_ + subject] = accuracy;
  defined_[stage * n_ + subject] = 1;
}

bool AccuracyMatrix::defined(std::size_t stage, std::size_t subject) const {
  return stage < n_ && subject < n_ && defined_[stage * n_ + subject] != 0;
}

double AccuracyMatrix::at(std::size_t stage, std::size_t subject) const {
  if (!defined(stage, subject)) {
    throw UndefinedMetricError("accuracy cell (" + std::to_string(stage) + ", " +
                               std::to_string(subject) + ") is undefined");
  }
  return values_[stage * n_ + subject];
}

double bwt(const AccuracyMatrix& m) {
  const std::size_t n = m.size();
  if (n < 2) throw UndefinedMetricError("BWT needs at least two subjects");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) total += m.at(n - 1, i) - m.at(i, i);
  return total / static_cast<double>(n - 1);
}

double final_acc(const AccuracyMatrix& m) {
  const std::size_t n = m.size();
  if (n == 0) throw UndefinedMetricError("ACC of an empty matrix");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += m.at(n - 1, i);
  return total / static_cast<double>(n);
}

std::vector<CurvePoint> forgetting_curve(const AccuracyMatrix& m, std::size_t subject) {
  if (subject < 1 || subject > m.size()) {
    throw RangeError("subject " + std::to_string(subject) + " outside 1.." +
                     std::to_string(m.size()));
  }
  std::vector<CurvePoint> curve;
  for (std::size_t j = subject - 1; j < m.size(); ++j) {
    curve.push_back(CurvePoint{j + 1, m.at(j, subject - 1)});
  }
  return curve;
}

void AccessAudit::record_read(std::size_t subject_index) {
  if (reads_.size() <= subject_index) reads_.resize(subject_index + 1, 0);
  ++reads_[subject_index];
  ++total_reads_;
  if (subject_index < stage_) ++violations_;
}

std::vector<LabeledTrial> SubjectAccess::subset(Split split) const {
  if (audit_ != nullptr) audit_->record_read(index_);
  return dataset_->subset(split);
}

namespace {

std::vector<Trial> raw_trials(const std::vector<LabeledTrial>& set) {
  std::vector<Trial> out;
  out.reserve(set.size());
  for (const LabeledTrial& t : set) out.push_back(t.trial);
  return out;
}

void whiten_in_place(std::vector<LabeledTrial>& set, const Matrix& whitener) {
  for (LabeledTrial& t : set) t.trial = alignment::apply(whitener, t.trial);
}

void check_stream(std::span<const SubjectDataset> stream) {
  if (stream.empty()) throw EmptyInputError("run_continual: empty stream");
  const SubjectDataset& first = stream.front();
  std::size_t rows = 0, cols = 0;
  for (const SubjectDataset& s : stream) {
    if (s.n_classes != first.n_classes) {
      throw ShapeError("subjects disagree on the class count");
    }
    for (const LabeledTrial& t : s.trials) {
      if (rows == 0) {
        rows = t.trial.rows();
        cols = t.trial.cols();
      } else if (t.trial.rows() != rows || t.trial.cols() != cols) {
        throw ShapeError("subjects disagree on trial dimensions");
      }
    }
  }
}

}  // namespace

RunRecord run_continual(std::span<const SubjectDataset> stream,
                        const Strategy& strategy, const nn::ModelConfig& model_cfg,
                        const nn::TrainConfig& train_cfg, const RunSeeds& seeds,
                        AccessAudit* audit) {
  check_stream(stream);
  const nn::Model model(model_cfg);
  const std::size_t n = stream.size();

  RunRecord record;
  record.strategy = strategy;
  record.seeds = seeds;
  record.architecture = nn::to_string(model_cfg.architecture);
  record.matrix = AccuracyMatrix(n);

  std::optional<replay::ReplayMemory> memory;
  Rng select_rng(derive_seed(seeds.train, "memory-select"));
  if (strategy.memory) {
    memory.emplace(strategy.memory->capacity, strategy.memory->policy,
                   derive_seed(seeds.train, "memory"));
  }
  std::optional<ewc::FisherAnchor> anchor;

  std::vector<std::vector<LabeledTrial>> holdouts;
  nn::Params params = model.init();

  for (std::size_t k = 0; k < n; ++k) {
    const auto stage_start = std::chrono::steady_clock::now();
    if (audit != nullptr) audit->begin_stage(k);
    const SubjectAccess subject(stream[k], k, audit);

    std::vector<LabeledTrial> train_split = subject.subset(Split::kTrain);
    std::vector<LabeledTrial> val_split = subject.subset(Split::kVal);
    std::vector<LabeledTrial> test_split = subject.subset(Split::kTest);
    if (test_split.empty()) {
      throw EmptyInputError("subject " + std::to_string(subject.subject_id()) +
                            " has an empty test split");
    }
    if (strategy.alignment_enabled) {
      const std::vector<Trial> raw = raw_trials(train_split);
      const alignment::AlignmentReport report = alignment::fit(raw);
      whiten_in_place(train_split, report.whitener);
      whiten_in_place(val_split, report.whitener);
      whiten_in_place(test_split, report.whitener);
      record.condition_numbers.push_back(report.condition_number);
    }
    holdouts.push_back(std::move(test_split));

    std::vector<LabeledTrial> train_set = train_split;
    if (memory) {
      for (const LabeledTrial& e : memory->entries()) train_set.push_back(e);
    }

    nn::TrainConfig stage_cfg = train_cfg;
    stage_cfg.shuffle_seed = derive_seed(seeds.train, "shuffle", k);
    nn::PenaltyHook hook;
    if (anchor) {
      hook = [&a = *anchor](std::span<const double> p, std::span<double> g) {
        return ewc::add_penalty(p, a, g);
      };
    }
    nn::TrainResult trained =
        nn::train(model, std::move(params), train_set, val_split, stage_cfg, hook);
    params = std::move(trained.params);
    record.epochs_trained.push_back(static_cast<int>(trained.history.val_accuracy.size()));

    if (memory) {
      if (memory->policy() == replay::Policy::kClassBalanced) {
        SubjectDataset current;
        current.subject_id = subject.subject_id();
        current.n_classes = subject.n_classes();
        current.trials = train_split;
        current.splits.assign(train_split.size(), Split::kTrain);
        memory->store_class_balanced(current, strategy.memory->per_class, select_rng);
      } else {
        for (const LabeledTrial& t : train_split) memory->offer(t);
      }
    }
    if (strategy.ewc_lambda) {
      if (!anchor) {
        anchor.emplace();
        anchor->lambda = *strategy.ewc_lambda;
      }
      ewc::consolidate(*anchor, params, ewc::fisher_diagonal(model, params, train_split));
    }

    for (std::size_t i = 0; i <= k; ++i) {
      record.matrix.set(k, i, nn::evaluate(model, params, holdouts[i]));
    }
    record.memory_occupancy.push_back(memory ? memory->size() : 0);
    record.stage_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - stage_start)
            .count());
  }

  record.acc = final_acc(record.matrix);
  if (n >= 2) record.bwt = bwt(record.matrix);
  record.final_params = std::move(params);
  return record;
}

nlohmann::ordered_json to_json(const RunRecord& record) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["strategy"] = to_string(record.strategy.kind);
  j["alignment"] = record.strategy.alignment_enabled;
  if (record.strategy.memory) {
    j["memory"] = {{"capacity", record.strategy.memory->capacity},
                   {"per_class", record.strategy.memory->per_class},
                   {"policy", replay::to_string(record.strategy.memory->policy)}};
  } else {
    j["memory"] = nullptr;
  }
  j["ewc_lambda"] = record.strategy.ewc_lambda ? ordered_json(*record.strategy.ewc_lambda)
                                               : ordered_json(nullptr);
  j["seeds"] = {{"stream", record.seeds.stream},
                {"model", record.seeds.model},
                {"train", record.seeds.train}};
  j["architecture"] = record.architecture;
  const std::size_t n = record.matrix.size();
  j["n_subjects"] = n;
  ordered_json rows = ordered_json::array();
  for (std::size_t s = 0; s < n; ++s) {
    ordered_json row = ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      row.push_back(record.matrix.defined(s, i) ? ordered_json(record.matrix.at(s, i))
                                                : ordered_json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  j["acc"] = record.acc;
  j["bwt"] = record.bwt ? ordered_json(*record.bwt) : ordered_json(nullptr);
  j["memory_occupancy"] = record.memory_occupancy;
  j["epochs_trained"] = record.epochs_trained;
  j["condition_numbers"] = record.condition_numbers;
  j["stage_seconds"] = record.stage_seconds;
  double wall = 0.0;
  for (double s : record.stage_seconds) wall += s;
  j["wall_seconds"] = wall;
  return j;
}

ReportSummary summary_from_json(const nlohmann::json& report) {
  ReportSummary out;
  try {
    out.strategy = report.at("strategy").get<std::string>();
    const auto& seeds = report.at("seeds");
    out.seeds.stream = seeds.at("stream").get<std::uint64_t>();
    out.seeds.model = seeds.at("model").get<std::uint64_t>();
    out.seeds.train = seeds.at("train").get<std::uint64_t>();
    const auto& rows = report.at("matrix");
    const std::size_t n = rows.size();
    out.matrix = AccuracyMatrix(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (rows[s].size() != n) throw ConfigError("report matrix is not square");
      for (std::size_t i = 0; i < n; ++i) {
        if (!rows[s][i].is_null()) out.matrix.set(s, i, rows[s][i].get<double>());
      }
    }
    out.acc = report.at("acc").get<double>();
    if (!report.at("bwt").is_null()) out.bwt = report.at("bwt").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return out;
}

std::string matrix_csv(const AccuracyMatrix& m) {
  std::ostringstream out;
  out << "stage";
  for (std::size_t i = 0; i < m.size(); ++i) out << ",subject_" << (i + 1);
  out << "\n";
  char buf[32];
  for (std::size_t s = 0; s < m.size(); ++s) {
    out << (s + 1);
    for (std::size_t i = 0; i < m.size(); ++i) {
      out << ",";
      if (m.defined(s, i)) {
        std::snprintf(buf, sizeof buf, "%.6f", m.at(s, i));
        out << buf;
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace pced::harness
