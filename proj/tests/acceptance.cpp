// tests/acceptance.cpp

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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pced/alignment.hpp"
#include "pced/classifier.hpp"
#include "pced/dataset.hpp"
#include "pced/experiment.hpp"
#include "pced/harness.hpp"
#include "pced/linalg.hpp"
#include "retention.hpp"
#include "support.hpp"

using namespace pced;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome alignment_postcondition() {
  const auto start = Clock::now();
  StreamConfig cfg;
  cfg.n_subjects = 50;
  cfg.n_channels = 8;
  cfg.n_timepoints = 64;
  cfg.trials_per_subject = 120;
  cfg.seed = 2024;
  const Stream stream = dataset::gen_stream(cfg);
  double worst = 0.0;
  for (const SubjectDataset& s : stream.subjects) {
    std::vector<Trial> raw;
    for (const LabeledTrial& t : s.trials) raw.push_back(t.trial);
    const auto aligned = alignment::align_subject(raw);
    Matrix mean(8, 8);
    for (const Trial& t : aligned.trials) mean = linalg::add(mean, linalg::covariance(t));
    mean = linalg::scale(mean, 1.0 / static_cast<double>(aligned.trials.size()));
    worst = std::max(worst, testing::identity_error(mean));
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-6 && elapsed < 5.0,
          fmt("max ||mean cov - I||_F = %.3g over 50 subjects (< 1e-6), %.2f s (< 5 s)", worst,
              elapsed)};
}

Outcome sandwich_identity() {
  Rng rng(77);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 32);
    const Matrix a = testing::random_spd(rng, n, 0.1);
    const Matrix w = linalg::inv_sqrt(a);
    worst = std::max(worst, testing::identity_error(linalg::matmul(linalg::matmul(w, a), w)));
  }
  return {worst < 1e-6,
          fmt("max ||A^-1/2 A A^-1/2 - I||_F = %.3g over 100 SPD matrices up to 32x32", worst)};
}

Outcome gradient_check() {
  Rng rng(99);
  int instances = 0, bad_coords = 0;
  std::size_t largest = 0;
  double worst_ratio = 0.0;
  for (int i = 0; i < 20; ++i) {
    nn::ModelConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(1000 + i);
    cfg.n_classes = 2 + i % 2;
    if (i % 2 == 0) {
      cfg.architecture = nn::Architecture::kMlp;
      cfg.n_channels = 2 + static_cast<int>(uniform_index(rng, 3));
      cfg.n_timepoints = 3 + static_cast<int>(uniform_index(rng, 6));
      cfg.hidden = {4 + static_cast<int>(uniform_index(rng, 6))};
      if (i % 4 == 0) cfg.hidden.push_back(3);
    } else {
      cfg.architecture = nn::Architecture::kShallowConv;
      cfg.n_channels = 2 + static_cast<int>(uniform_index(rng, 4));
      cfg.n_timepoints = 10 + static_cast<int>(uniform_index(rng, 20));
      cfg.n_filters = 2 + static_cast<int>(uniform_index(rng, 3));
      cfg.n_spatial = 2 + static_cast<int>(uniform_index(rng, 4));
      cfg.kernel_length = 2 + static_cast<int>(uniform_index(rng, 6));
    }
    const nn::Model model(cfg);
    if (model.parameter_count() > 500) continue;
    largest = std::max(largest, model.parameter_count());
    ++instances;
    nn::Params p = model.init();
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (double& v : p.values) v += jitter(rng);
    std::vector<LabeledTrial> batch;
    for (int b = 0; b < 5; ++b) {
      batch.push_back({testing::random_trial(rng, static_cast<std::size_t>(cfg.n_channels),
                                             static_cast<std::size_t>(cfg.n_timepoints)),
                       static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.n_classes))),
                       0, static_cast<std::uint32_t>(b)});
    }
    const std::vector<double> g = model.gradient(p, batch);
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      nn::Params plus = p, minus = p;
      plus.values[k] += 1e-5;
      minus.values[k] -= 1e-5;
      const double fd = (model.loss(plus, batch) - model.loss(minus, batch)) / 2e-5;
      const double tol = std::max(1e-4, 1e-3 * std::abs(fd));
      worst_ratio = std::max(worst_ratio, std::abs(fd - g[k]) / tol);
      if (std::abs(fd - g[k]) > tol) ++bad_coords;
    }
  }
  return {instances == 20 && bad_coords == 0,
          fmt("%.0f instances (mlp and shallow_conv, <= %.0f params), %.0f coordinates out of "
              "tolerance, worst error/tolerance %.3f",
              instances, static_cast<double>(largest), bad_coords, worst_ratio)};
}

Outcome reservoir_uniformity() {
  const auto start = Clock::now();
  const auto standard =
      testing::retention_test(replay::Policy::kReservoirStandard, 10, 1000, 20000, 50, 4242);
  const auto literal =
      testing::retention_test(replay::Policy::kReservoirPaperLiteral, 10, 1000, 20000, 50, 4242);
  const double elapsed = seconds_since(start);
  return {standard.p_value > 0.001 && literal.p_value < 0.001 && elapsed < 60.0,
          fmt("standard p = %.4f (> 0.001), constant-probability p = %.3g (< 0.001, rejected), %.1f s",
              standard.p_value, literal.p_value, elapsed)};
}

harness::AccuracyMatrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  harness::AccuracyMatrix m(rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    for (std::size_t i = 0; i <= s; ++i) m.set(s, i, rows[s][i]);
  }
  return m;
}

Outcome metric_identities() {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_zero = 0.0, worst_acc = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 15);
    harness::AccuracyMatrix m(n);
    std::vector<double> diag(n);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < s; ++i) m.set(s, i, u(rng));
      diag[s] = u(rng);
      m.set(s, s, diag[s]);
    }
    for (std::size_t i = 0; i < n; ++i) m.set(n - 1, i, diag[i]);
    worst_zero = std::max(worst_zero, std::abs(harness::bwt(m)));
    long double mean = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mean += m.at(n - 1, i);
    mean /= static_cast<long double>(n);
    worst_acc = std::max(worst_acc, std::abs(harness::final_acc(m) - static_cast<double>(mean)));
  }
  const double n2 = harness::bwt(rows_to_matrix({{0.8}, {0.7, 0.9}}));
  const double n3 = harness::bwt(rows_to_matrix({{0.6}, {0.5, 0.7}, {0.7, 0.7, 0.4}}));
  const bool ok = worst_zero == 0.0 && std::abs(n2 + 0.10) < 1e-12 &&
                  std::abs(n3 - 0.05) < 1e-12 && worst_acc < 1e-12;
  return {ok, fmt("no-forgetting BWT max |.| = %.3g; N=2 BWT = %.12f; N=3 BWT = %.12f; "
                  "ACC vs row mean max diff %.3g",
                  worst_zero, n2, n3, worst_acc)};
}

struct StreamRuns {
  std::map<harness::StrategyKind, std::vector<harness::RunRecord>> records;
  std::size_t violations = 0;
  std::size_t reads = 0;
  std::size_t expected_reads = 0;
  double seconds = 0.0;
};

StreamRuns run_default_stream(const std::vector<std::uint64_t>& seeds) {
  StreamRuns out;
  const auto start = Clock::now();
  const Stream stream = dataset::gen_stream(StreamConfig{});
  experiment::ExperimentConfig cfg;
  cfg.strategies = {harness::StrategyKind::kSft, harness::StrategyKind::kEwc,
                    harness::StrategyKind::kEr, harness::StrategyKind::kPced};
  nn::ModelConfig model = cfg.model;
  model.n_channels = stream.n_channels;
  model.n_timepoints = stream.n_timepoints;
  model.n_classes = stream.n_classes;
  for (auto kind : cfg.strategies) {
    for (auto seed : seeds) {
      harness::AccessAudit audit;
      nn::ModelConfig m = model;
      m.seed = seed;
      out.records[kind].push_back(harness::run_continual(
          stream.subjects, experiment::make_strategy(kind, cfg), m, cfg.train,
          {stream.seed, seed, seed}, &audit));
      out.violations += audit.violations();
      out.reads += audit.total_reads();
      out.expected_reads += 3 * stream.subjects.size();
    }
  }
  out.seconds = seconds_since(start);
  return out;
}

double mean_of(const std::vector<harness::RunRecord>& rs,
               const std::function<double(const harness::RunRecord&)>& f) {
  double total = 0.0;
  for (const auto& r : rs) total += f(r);
  return total / static_cast<double>(rs.size());
}

}  // namespace

int main() {
  report(1, "alignment post-condition", alignment_postcondition());
  report(2, "inverse square root sandwich identity", sandwich_identity());
  report(3, "gradient correctness", gradient_check());
  report(4, "reservoir uniformity", reservoir_uniformity());
  report(5, "metric identities", metric_identities());

  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const StreamRuns runs = run_default_stream(seeds);
  using K = harness::StrategyKind;
  auto acc = [&](K k) { return mean_of(runs.records.at(k), [](const auto& r) { return r.acc; }); };
  auto bwt = [&](K k) { return mean_of(runs.records.at(k), [](const auto& r) { return *r.bwt; }); };
  auto drop = [&](K k) {
    return mean_of(runs.records.at(k), [](const auto& r) {
      const auto curve = harness::forgetting_curve(r.matrix, 1);
      return curve.front().accuracy - curve.back().accuracy;
    });
  };
  {
    const double p = acc(K::kPced), e = acc(K::kEr), s = acc(K::kSft);
    const double bs = bwt(K::kSft), bp = bwt(K::kPced);
    const bool ok = p > e && e > s && p - s >= 0.10 && bs < bp && bs <= -0.05 &&
                    runs.seconds < 600.0;
    report(6, "strategy ordering on the default stream",
           {ok, fmt("ACC PCED %.2f%% > ER %.2f%% > SFT %.2f%%", 100 * p, 100 * e, 100 * s) +
                    fmt(" (gap %.2f pp >= 10); BWT SFT %.2f pp <= -5 and < PCED %.2f pp",
                        100 * (p - s), 100 * bs, 100 * bp) +
                    fmt("; EWC ACC %.2f%%; all runs %.1f s (< 600 s)", 100 * acc(K::kEwc),
                        runs.seconds)});
  }
  {
    const double ds = drop(K::kSft), dp = drop(K::kPced);
    report(7, "subject-1 forgetting curve",
           {ds >= 0.10 && dp <= ds / 2,
            fmt("SFT drop %.2f pp (>= 10), PCED drop %.2f pp (<= %.2f)", 100 * ds, 100 * dp,
                100 * ds / 2)});
  }
  report(8, "protocol integrity",
         {runs.violations == 0 && runs.reads == runs.expected_reads,
          fmt("%.0f reads of past subjects; %.0f raw-split reads in total (%.0f expected) over "
              "4 strategies x 3 seeds",
              static_cast<double>(runs.violations), static_cast<double>(runs.reads),
              static_cast<double>(runs.expected_reads))});
  {
    // Reproduce two of the runs through the experiment runner and compare reports.
    const Stream stream = dataset::gen_stream(StreamConfig{});
    experiment::ExperimentConfig cfg;
    cfg.stream_generator = StreamConfig{};
    cfg.strategies = {K::kSft, K::kPced};
    cfg.seeds = {1};
    const auto again = experiment::run_all(stream, cfg, 2);
    auto strip = [](nlohmann::ordered_json j) {
      j.erase("stage_seconds");
      j.erase("wall_seconds");
      return j.dump(2);
    };
    int identical = 0;
    for (const auto& r : again) {
      const auto& first = runs.records.at(r.strategy.kind).front();
      if (strip(harness::to_json(first)) == strip(harness::to_json(r)) &&
          first.final_params == r.final_params) {
        ++identical;
      }
    }
    report(9, "determinism",
           {identical == 2, fmt("%.0f of 2 repeated runs byte-identical (reports without "
                                "wall-time fields, final parameters)",
                                identical)});
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
