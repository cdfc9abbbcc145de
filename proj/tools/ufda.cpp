// Copyright 2026 The UFDA Simulator Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ufda: scenario generation, single runs, ablation grids and sweeps.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ufda/cli.hpp"
#include "ufda/error.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> pseudo;
  std::optional<bool> gcld;
  std::optional<bool> mvd;
  std::optional<std::string> mvd_view;
  std::optional<double> lambda;
  std::optional<double> rounds;
  std::optional<std::size_t> epochs;
  bool sfda = false;
  bool serialize = false;
  bool dump_pseudo = false;
  std::string out = "ufda_out";

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON config (comments allowed)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Experiment seed");
    cmd->add_option("--pseudo", pseudo, "Pseudo-label source: phl|psl")
        ->check(CLI::IsMember({"phl", "psl"}));
    cmd->add_flag("--gcld,!--no-gcld", gcld, "Label disambiguation on/off");
    cmd->add_flag("--mvd,!--no-mvd", mvd, "Mutual voting on/off");
    cmd->add_option("--mvd-view", mvd_view, "Voting view: both|source|target")
        ->check(CLI::IsMember({"both", "source", "target"}));
    cmd->add_option("--lambda", lambda, "Shared-class threshold");
    cmd->add_option("-r,--rounds", rounds, "Communication events per epoch");
    cmd->add_option("--epochs", epochs, "Target training epochs");
    cmd->add_flag("--sfda", sfda, "Initial query only, no further communication");
    cmd->add_flag("--serialize", serialize, "Route messages through the line encoding");
    cmd->add_flag("--dump-pseudo-labels", dump_pseudo, "Write pseudo-label CSVs");
    cmd->add_option("-o,--out", out, "Output directory");
  }

  ufda::RunConfig resolve() const {
    ufda::RunConfig c = config_path.empty() ? ufda::RunConfig{} : ufda::load_config(config_path);
    if (seed) c.seed = *seed;
    if (pseudo) c.mode.pseudo = ufda::parse_pseudo_mode(*pseudo);
    if (gcld) c.mode.gcld = *gcld;
    if (mvd) c.mode.mvd = *mvd;
    if (mvd_view) c.mode.mvd_view = ufda::mvd::parse_view(*mvd_view);
    if (lambda) c.mode.lambda = *lambda;
    if (rounds) c.federation.rounds_per_epoch = *rounds;
    if (epochs) c.target.epochs = *epochs;
    if (sfda) c.federation.sfda = true;
    if (serialize) c.federation.serialize_messages = true;
    if (dump_pseudo) c.dump_pseudo_labels = true;
    c.target.hyper.enabled = c.mode.gcld;
    c.output_dir = out;
    c.validate();
    return c;
  }
};

std::vector<std::uint64_t> seed_list(const ufda::RunConfig& c, std::size_t n) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(c.seed + i);
  return seeds;
}

int exit_code(const std::vector<ufda::cli::CellResult>& cells) {
  for (const auto& c : cells) {
    if (!c.ok()) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Universal federated domain adaptation simulator"};
  app.require_subcommand(1);

  Overrides run_opts, ablate_opts, sweep_opts, gen_opts, show_opts;
  auto* run = app.add_subcommand("run", "Run one experiment and write its report");
  run_opts.attach(run);

  std::size_t ablate_seeds = 1;
  auto* ablate = app.add_subcommand("ablate", "Run the 8-row PSL/PHL x GCLD x MVD grid");
  ablate_opts.attach(ablate);
  ablate->add_option("--seeds", ablate_seeds, "Number of consecutive seeds per cell");

  std::string sweep_param;
  std::vector<double> sweep_values;
  std::size_t sweep_seeds = 1;
  bool sweep_sfda = false;
  auto* sweep = app.add_subcommand("sweep", "Sweep lambda or r");
  sweep_opts.attach(sweep);
  sweep->add_option("--param", sweep_param, "lambda|r")
      ->required()
      ->check(CLI::IsMember({"lambda", "r"}));
  sweep->add_option("--values", sweep_values, "Values to sweep")->required();
  sweep->add_option("--seeds", sweep_seeds, "Number of consecutive seeds per cell");
  sweep->add_flag("--with-sfda", sweep_sfda, "Append an SFDA cell to an r sweep");

  auto* gen = app.add_subcommand("generate", "Write the scenario datasets");
  gen_opts.attach(gen);

  auto* show = app.add_subcommand("show-config", "Print the fully resolved config");
  show_opts.attach(show);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto c = run_opts.resolve();
      ufda::cli::cmd_run(c, c.output_dir, std::cout);
    } else if (*ablate) {
      const auto c = ablate_opts.resolve();
      const auto cells = ufda::cli::cmd_ablate(c, seed_list(c, ablate_seeds), c.output_dir, std::cout);
      ufda::cli::write_cells_csv(std::cout, cells);
      return exit_code(cells);
    } else if (*sweep) {
      const auto c = sweep_opts.resolve();
      const auto cells =
          ufda::cli::cmd_sweep(c, ufda::cli::parse_sweep_param(sweep_param), sweep_values,
                               seed_list(c, sweep_seeds), c.output_dir, sweep_sfda, std::cout);
      ufda::cli::write_cells_csv(std::cout, cells);
      return exit_code(cells);
    } else if (*gen) {
      const auto c = gen_opts.resolve();
      ufda::cli::cmd_generate(c, c.output_dir, std::cout);
    } else if (*show) {
      std::cout << ufda::to_json(show_opts.resolve()).dump(2) << '\n';
    }
  } catch (const ufda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
