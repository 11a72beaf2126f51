// Copyright 2026 The kinetic-ergo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// kinetic-ergo <pipeline> --config <path> [--seed N] [--out DIR]

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "kergo/error.hpp"
#include "kergo/harness.hpp"
#include "kergo/parallel.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 0;
  std::optional<std::size_t> trials;
};

int run(const std::string& name, const Options& opt) {
  using namespace kergo;
  const PipelineKind kind = pipeline_from_string(name);
  ExperimentConfig cfg = ExperimentConfig::load(opt.config, kind);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.trials) cfg.dissipativity.trials = *opt.trials;
  const std::filesystem::path out =
      !opt.out.empty() ? opt.out : !cfg.output.empty() ? cfg.output : "out/" + to_string(kind);
  try {
    const ExperimentReport rep = run_experiment(cfg, out);
    for (const auto& c : rep.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.value.dump() << " (bound "
                << c.bound.dump() << ")\n";
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << to_string(kind) << ": " << (rep.passed ? "passed" : "FAILED") << "; summary at "
              << (out / "summary.json").string() << '\n';
    return rep.passed ? kExitPass : kExitAcceptanceFailure;
  } catch (const Error& e) {
    if (is_input_error(e.code())) throw;
    // A computation failure is an acceptance failure; keep a record of it.
    std::filesystem::create_directories(out);
    nlohmann::json summary = {{"pipeline", to_string(kind)}, {"seed", cfg.seed},        {"passed", false},
                              {"checks", nlohmann::json::array()}, {"warnings", nlohmann::json::array()},
                              {"results", nlohmann::json::object()}, {"config", cfg.to_json()},
                              {"files", {"summary.json"}},
                              {"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}}}};
    std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return kExitAcceptanceFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ergodicity experiments for kinetic and mean-field Langevin dynamics"};
  app.require_subcommand(1);
  Options opt;
  for (const std::string& name : kergo::pipeline_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--out", opt.out, "output directory (default: config 'output' or out/<pipeline>)");
    sub->add_option("--threads", opt.threads, "worker threads (0: hardware concurrency)");
    if (name == "check-dissipativity" || name == "dissipativity")
      sub->add_option("--trials", opt.trials, "sampled pairs per check")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kergo::kExitInputError;
  }
  try {
    kergo::set_worker_count(opt.threads);
    return run(app.get_subcommands().front()->get_name(), opt);
  } catch (const kergo::Error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    if (!e.detail().is_null()) std::cerr << e.detail().dump() << '\n';
    return kergo::kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kergo::kExitAcceptanceFailure;
  }
}
