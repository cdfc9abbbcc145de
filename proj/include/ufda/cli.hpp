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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ufda/config.hpp"
#include "ufda/federation.hpp"

namespace ufda::cli {

namespace fs = std::filesystem;

// One cell of an ablation or sweep: the same config over several seeds.
struct CellResult {
  std::string name;
  RunConfig config;  // seed field holds the first seed
  std::vector<std::uint64_t> seeds;
  std::vector<double> metrics;  // mean per-class accuracy per finished seed
  double mean = 0.0;
  std::string error;  // first failure, empty when every seed finished

  bool ok() const { return error.empty(); }
};

// The eight {PSL, PHL} x {GCLD} x {MVD} rows, PSL block first, each block
// ordered (none), (MVD), (GCLD), (GCLD + MVD).
std::vector<ModeFlags> ablation_grid(const ModeFlags& base);
std::string cell_name(const ModeFlags& flags);

// Runs one config and writes its report into `out`.
federation::ExperimentReport cmd_run(const RunConfig& config, const fs::path& out,
                                     std::ostream& log);

// Runs every cell for every seed. Reports go to out/<cell>/seed_<s>/ and the
// summary table to out/<table_name>. A failing seed is recorded on its cell
// and the remaining cells still run.
std::vector<CellResult> run_cells(const std::vector<std::pair<std::string, RunConfig>>& cells,
                                  const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                  const std::string& table_name, std::ostream& log);

std::vector<CellResult> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                   const fs::path& out, std::ostream& log);

enum class SweepParam { kLambda, kRate };
SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam p);

// Sweep over lambda or r. A rate sweep also appends an SFDA cell.
std::vector<CellResult> cmd_sweep(const RunConfig& base, SweepParam param,
                                  const std::vector<double>& values,
                                  const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                  bool with_sfda, std::ostream& log);

// Writes source_<m>.txt and target.txt dataset dumps.
void cmd_generate(const RunConfig& config, const fs::path& out, std::ostream& log);

void write_cells_csv(std::ostream& out, const std::vector<CellResult>& cells);

}  // namespace ufda::cli
