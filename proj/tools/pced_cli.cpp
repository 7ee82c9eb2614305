// tools/pced_cli.cpp

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

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pced/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Subject-incremental EEG decoding experiments"};
  app.require_subcommand(1);

  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic subject stream");
  gen->add_option("--config", gen_config, "Stream config (JSON)")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::string run_config, run_out;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run continual-learning experiments");
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Output directory (overrides output_dir)");
  run->add_option("--jobs", jobs, "Parallel (strategy, seed) runs")->check(CLI::PositiveNumber);

  std::string report_dir, curve;
  auto* report = app.add_subcommand("report", "Forgetting-curve CSV from a run directory");
  report->add_option("dir", report_dir, "Run directory")->required();
  report->add_option("--curve", curve, "subject=I (1-based, default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pced::experiment::kExitUsage;
  }

  using namespace pced::experiment;
  if (*gen) return cmd_gen(gen_config, gen_out, std::cout, std::cerr);
  if (*run) {
    std::optional<std::filesystem::path> out;
    if (!run_out.empty()) out = run_out;
    return cmd_run(run_config, out, jobs, std::cout, std::cerr);
  }
  std::optional<std::string> curve_opt;
  if (!curve.empty()) curve_opt = curve;
  return cmd_report(report_dir, curve_opt, std::cout, std::cerr);
}
