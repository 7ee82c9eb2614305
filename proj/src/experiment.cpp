// experiment.cpp

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

#include "pced/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace pced::experiment {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  binary::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                     text.size()));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

// Summary row order: baselines first, then the full method.
int strategy_rank(harness::StrategyKind kind) {
  switch (kind) {
    case harness::StrategyKind::kSft: return 0;
    case harness::StrategyKind::kEwc: return 1;
    case harness::StrategyKind::kEr: return 2;
    case harness::StrategyKind::kPced: return 3;
  }
  return 4;
}

}  // namespace

StreamConfig stream_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("stream config must be a JSON object");
  StreamConfig c;
  try {
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.n_channels = j.value("n_channels", c.n_channels);
    c.n_timepoints = j.value("n_timepoints", c.n_timepoints);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.trials_per_subject = j.value("trials_per_subject", c.trials_per_subject);
    c.mixing_scale = j.value("mixing_scale", c.mixing_scale);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.seed = j.value("seed", c.seed);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stream config: ") + e.what());
  }
  c.validate();
  return c;
}

ordered_json to_json(const StreamConfig& c) {
  return ordered_json{{"n_subjects", c.n_subjects},
                      {"n_channels", c.n_channels},
                      {"n_timepoints", c.n_timepoints},
                      {"n_classes", c.n_classes},
                      {"trials_per_subject", c.trials_per_subject},
                      {"mixing_scale", c.mixing_scale},
                      {"noise_sigma", c.noise_sigma},
                      {"seed", c.seed},
                      {"train_fraction", c.train_fraction}};
}

void ExperimentConfig::validate() const {
  if (stream_path.has_value() == stream_generator.has_value()) {
    throw ConfigError("exactly one of stream.path and stream.generate is required");
  }
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be unique");
  }
  if (std::set<harness::StrategyKind>(strategies.begin(), strategies.end()).size() !=
      strategies.size()) {
    throw ConfigError("strategies must be unique");
  }
  if (!(ewc_lambda >= 0.0)) throw ConfigError("ewc.lambda must be >= 0");
  train.validate();
}

ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig cfg;
  try {
    const json& stream = j.at("stream");
    if (stream.contains("path")) {
      std::filesystem::path p = stream.at("path").get<std::string>();
      cfg.stream_path = p.is_absolute() ? p : base_dir / p;
    }
    if (stream.contains("generate")) {
      cfg.stream_generator = stream_config_from_json(stream.at("generate"));
    }
    for (const auto& s : j.at("strategies")) {
      cfg.strategies.push_back(harness::strategy_from_string(s.get<std::string>()));
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      cfg.model.architecture = nn::architecture_from_string(
          m.value("architecture", nn::to_string(cfg.model.architecture)));
      cfg.model.hidden = m.value("hidden", cfg.model.hidden);
      cfg.model.n_filters = m.value("n_filters", cfg.model.n_filters);
      cfg.model.n_spatial = m.value("n_spatial", cfg.model.n_spatial);
      cfg.model.kernel_length = m.value("kernel_length", cfg.model.kernel_length);
      cfg.model.aux_subject_classes = m.value("aux_subject_head", false) ? -1 : 0;
      cfg.model.aux_weight = m.value("aux_weight", cfg.model.aux_weight);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.patience = t.value("patience", cfg.train.patience);
      const std::string opt = t.value("optimizer", std::string("adam"));
      if (opt == "adam") {
        cfg.train.optimizer = nn::Optimizer::kAdam;
      } else if (opt == "sgd") {
        cfg.train.optimizer = nn::Optimizer::kSgd;
      } else {
        throw ConfigError("unknown optimizer '" + opt + "'");
      }
    }
    if (j.contains("memory")) {
      const json& m = j.at("memory");
      cfg.memory.capacity = m.value("capacity", cfg.memory.capacity);
      cfg.memory.per_class = m.value("per_class", cfg.memory.per_class);
      cfg.memory.policy = replay::policy_from_string(
          m.value("policy", replay::to_string(cfg.memory.policy)));
    }
    if (j.contains("ewc")) cfg.ewc_lambda = j.at("ewc").value("lambda", cfg.ewc_lambda);
    if (j.contains("seeds")) {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else if (j.contains("repeat")) {
      const int repeat = j.at("repeat").get<int>();
      if (repeat < 1) throw ConfigError("repeat must be >= 1");
      cfg.seeds.clear();
      for (int r = 1; r <= repeat; ++r) cfg.seeds.push_back(static_cast<std::uint64_t>(r));
    }
    if (j.contains("output_dir")) {
      std::filesystem::path p = j.at("output_dir").get<std::string>();
      cfg.output_dir = p.is_absolute() ? p : base_dir / p;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

harness::Strategy make_strategy(harness::StrategyKind kind, const ExperimentConfig& cfg) {
  switch (kind) {
    case harness::StrategyKind::kSft: return harness::Strategy::sft();
    case harness::StrategyKind::kEr: return harness::Strategy::er(cfg.memory);
    case harness::StrategyKind::kEwc: return harness::Strategy::ewc(cfg.ewc_lambda);
    case harness::StrategyKind::kPced: return harness::Strategy::pced(cfg.memory);
  }
  throw ConfigError("unknown strategy");
}

std::vector<Aggregate> aggregate(const std::vector<harness::RunRecord>& records) {
  std::map<int, std::vector<const harness::RunRecord*>> groups;
  for (const auto& r : records) groups[strategy_rank(r.strategy.kind)].push_back(&r);

  auto mean_sd = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd =
        xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return std::pair{mean, sd};
  };

  std::vector<Aggregate> rows;
  for (const auto& [rank, group] : groups) {
    Aggregate a;
    a.strategy = group.front()->strategy.kind;
    a.runs = group.size();
    std::vector<double> accs, bwts;
    for (const auto* r : group) {
      accs.push_back(r->acc);
      if (r->bwt) bwts.push_back(*r->bwt);
    }
    std::tie(a.acc_mean, a.acc_sd) = mean_sd(accs);
    if (bwts.size() == group.size()) {
      const auto [m, s] = mean_sd(bwts);
      a.bwt_mean = m;
      a.bwt_sd = s;
    }
    rows.push_back(a);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Aggregate& l, const Aggregate& r) {
    return l.acc_mean > r.acc_mean;
  });
  return rows;
}

std::string summary_csv(const std::vector<Aggregate>& rows) {
  std::ostringstream out;
  out << "strategy,runs,acc_mean_pct,acc_sd_pct,bwt_mean_pct,bwt_sd_pct\n";
  for (const Aggregate& a : rows) {
    out << harness::to_string(a.strategy) << "," << a.runs << ","
        << fmt("%.4f", 100.0 * a.acc_mean) << "," << fmt("%.4f", 100.0 * a.acc_sd) << ",";
    if (a.bwt_mean) {
      out << fmt("%.4f", 100.0 * *a.bwt_mean) << "," << fmt("%.4f", 100.0 * *a.bwt_sd);
    } else {
      out << "NA,NA";
    }
    out << "\n";
  }
  return out.str();
}

std::string summary_table(const std::vector<Aggregate>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-18s %-18s %s\n", "Method", "ACC (%)", "BWT (%)",
                "runs");
  out << line;
  for (const Aggregate& a : rows) {
    const std::string acc =
        fmt("%.2f", 100.0 * a.acc_mean) + " +/- " + fmt("%.2f", 100.0 * a.acc_sd);
    const std::string bwt = a.bwt_mean ? fmt("%.2f", 100.0 * *a.bwt_mean) + " +/- " +
                                             fmt("%.2f", 100.0 * *a.bwt_sd)
                                       : std::string("n/a");
    std::snprintf(line, sizeof line, "%-8s %-18s %-18s %zu\n",
                  harness::to_string(a.strategy).c_str(), acc.c_str(), bwt.c_str(), a.runs);
    out << line;
  }
  return out.str();
}

std::vector<harness::RunRecord> run_all(const Stream& stream, const ExperimentConfig& cfg,
                                        int jobs) {
  struct Task {
    harness::StrategyKind kind;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (auto kind : cfg.strategies) {
    for (auto seed : cfg.seeds) tasks.push_back({kind, seed});
  }
  nn::ModelConfig model = cfg.model;
  model.n_channels = stream.n_channels;
  model.n_timepoints = stream.n_timepoints;
  model.n_classes = stream.n_classes;
  if (model.aux_subject_classes != 0) {
    int max_id = 0;
    for (const auto& s : stream.subjects) max_id = std::max(max_id, s.subject_id);
    model.aux_subject_classes = max_id + 1;
  }
  model.validate();

  std::vector<std::optional<harness::RunRecord>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        nn::ModelConfig m = model;
        m.seed = tasks[i].seed;
        const harness::RunSeeds seeds{stream.seed, tasks[i].seed, tasks[i].seed};
        results[i] = harness::run_continual(stream.subjects, make_strategy(tasks[i].kind, cfg),
                                            m, cfg.train, seeds);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<harness::RunRecord> out;
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

std::string report_file_name(harness::StrategyKind kind, std::uint64_t seed) {
  return "report_" + harness::to_string(kind) + "_" + std::to_string(seed) + ".json";
}

std::string matrix_file_name(harness::StrategyKind kind, std::uint64_t seed) {
  return "matrix_" + harness::to_string(kind) + "_" + std::to_string(seed) + ".csv";
}

std::string curve_file_name(std::size_t subject) {
  return "curve_subject" + std::to_string(subject) + ".csv";
}

std::vector<harness::ReportSummary> load_reports(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError(dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("report_") && name.ends_with(".json")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<harness::ReportSummary> reports;
  for (const auto& f : files) reports.push_back(harness::summary_from_json(read_json_file(f)));
  return reports;
}

std::string curve_csv(const std::vector<harness::ReportSummary>& reports,
                      std::size_t subject) {
  if (reports.empty()) throw ConfigError("no reports found");
  const std::size_t n = reports.front().matrix.size();
  std::map<int, std::pair<std::string, std::vector<const harness::ReportSummary*>>> groups;
  for (const auto& r : reports) {
    if (r.matrix.size() != n) throw ConfigError("reports disagree on the subject count");
    const auto kind = harness::strategy_from_string(r.strategy);
    auto& g = groups[strategy_rank(kind)];
    g.first = r.strategy;
    g.second.push_back(&r);
  }
  if (subject < 1 || subject > n) {
    throw RangeError("subject " + std::to_string(subject) + " outside 1.." +
                     std::to_string(n));
  }
  std::vector<std::vector<double>> columns;
  std::ostringstream out;
  out << "stage";
  for (const auto& [rank, g] : groups) {
    out << "," << g.first;
    std::vector<double> mean(n - subject + 1, 0.0);
    for (const auto* r : g.second) {
      const auto curve = harness::forgetting_curve(r->matrix, subject);
      for (std::size_t i = 0; i < curve.size(); ++i) mean[i] += curve[i].accuracy;
    }
    for (double& v : mean) v /= static_cast<double>(g.second.size());
    columns.push_back(std::move(mean));
  }
  out << "\n";
  for (std::size_t i = 0; i + subject <= n; ++i) {
    out << (subject + i);
    for (const auto& col : columns) out << "," << fmt("%.6f", col[i]);
    out << "\n";
  }
  return out.str();
}

int cmd_gen(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const StreamConfig cfg = stream_config_from_json(read_json_file(config_path));
    const Stream stream = dataset::gen_stream(cfg);
    dataset::save_stream(stream, out_dir);
    out << "wrote " << stream.subjects.size() << " subjects to " << out_dir.string() << " ("
        << stream.n_channels << " channels x " << stream.n_timepoints << " timepoints, "
        << stream.n_classes << " classes, seed " << stream.seed << ")\n";
    for (std::size_t k = 0; k < stream.subjects.size(); ++k) {
      const auto& s = stream.subjects[k];
      out << "  " << dataset::subject_file_name(static_cast<int>(k)) << ": "
          << s.trials.size() << " trials (train " << s.count(Split::kTrain) << ", val "
          << s.count(Split::kVal) << ", test " << s.count(Split::kTest) << ")\n";
    }
    return kExitOk;
  });
}

int cmd_run(const std::filesystem::path& config_path,
            const std::optional<std::filesystem::path>& out_dir, int jobs,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    ExperimentConfig cfg =
        experiment_from_json(read_json_file(config_path), config_path.parent_path());
    if (out_dir) cfg.output_dir = *out_dir;

    Stream stream;
    if (cfg.stream_path) {
      if (!std::filesystem::is_directory(*cfg.stream_path)) {
        throw ConfigError("stream path " + cfg.stream_path->string() + " does not exist");
      }
      stream = dataset::load_stream(*cfg.stream_path);
    } else {
      stream = dataset::gen_stream(*cfg.stream_generator);
    }

    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());

    const std::vector<harness::RunRecord> records = run_all(stream, cfg, jobs);
    for (const auto& r : records) {
      write_text(cfg.output_dir / report_file_name(r.strategy.kind, r.seeds.model),
                 harness::to_json(r).dump(2) + "\n");
      write_text(cfg.output_dir / matrix_file_name(r.strategy.kind, r.seeds.model),
                 harness::matrix_csv(r.matrix));
    }
    const std::vector<Aggregate> rows = aggregate(records);
    write_text(cfg.output_dir / "summary.csv", summary_csv(rows));

    const bool color = &out == &std::cout && std::getenv("NO_COLOR") == nullptr &&
                       ::isatty(STDOUT_FILENO) != 0;
    std::string table = summary_table(rows);
    if (color) {
      const auto eol = table.find('\n');
      table = "\033[1m" + table.substr(0, eol) + "\033[0m" + table.substr(eol);
    }
    out << table;
    out << "reports written to " << cfg.output_dir.string() << "\n";
    return kExitOk;
  });
}

int cmd_report(const std::filesystem::path& run_dir, const std::optional<std::string>& curve,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::size_t subject = 1;
    if (curve) {
      const std::string prefix = "subject=";
      if (!curve->starts_with(prefix) || curve->size() == prefix.size()) {
        throw ConfigError("--curve expects subject=I, got '" + *curve + "'");
      }
      const std::string digits = curve->substr(prefix.size());
      if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError("--curve expects a positive integer subject index");
      }
      subject = std::stoul(digits);
    }
    const auto reports = load_reports(run_dir);
    if (reports.empty()) throw ConfigError("no reports found in " + run_dir.string());
    const std::string csv = curve_csv(reports, subject);
    write_text(run_dir / curve_file_name(subject), csv);
    out << csv;
    return kExitOk;
  });
}

}  // namespace pced::experiment
