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

#include "ufda/cli.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "ufda/error.hpp"

namespace ufda::cli {

std::vector<ModeFlags> ablation_grid(const ModeFlags& base) {
  std::vector<ModeFlags> rows;
  for (PseudoLabelMode p : {PseudoLabelMode::kPsl, PseudoLabelMode::kPhl}) {
    for (bool gcld : {false, true}) {
      for (bool mvd : {false, true}) {
        ModeFlags f = base;
        f.pseudo = p;
        f.gcld = gcld;
        f.mvd = mvd;
        rows.push_back(f);
      }
    }
  }
  return rows;
}

std::string cell_name(const ModeFlags& f) {
  std::string s = to_string(f.pseudo);
  if (f.gcld) s += "+gcld";
  if (f.mvd) {
    s += "+mvd";
    if (f.mvd_view != mvd::View::kBoth) s += "-" + mvd::to_string(f.mvd_view);
  }
  return s;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

federation::ExperimentReport cmd_run(const RunConfig& config, const fs::path& out,
                                     std::ostream& log) {
  auto report = federation::run_experiment(config);
  federation::write_report(out, report);
  for (const auto& w : report.metrics.warnings) log << "warning: " << w << '\n';
  log << "seed " << config.seed << ": mean per-class accuracy " << fixed(report.metrics.mean_accuracy)
      << " (" << fixed(report.wall_clock_seconds) << " s)\n";
  return report;
}

std::vector<CellResult> run_cells(const std::vector<std::pair<std::string, RunConfig>>& cells,
                                  const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                  const std::string& table_name, std::ostream& log) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::vector<CellResult> results;
  for (const auto& [name, cfg] : cells) {
    CellResult cell;
    cell.name = name;
    cell.config = cfg;
    cell.config.seed = seeds.front();
    cell.seeds = seeds;
    for (std::uint64_t seed : seeds) {
      RunConfig c = cfg;
      c.seed = seed;
      log << name << ' ';
      try {
        auto report = cmd_run(c, out / name / ("seed_" + std::to_string(seed)), log);
        cell.metrics.push_back(report.metrics.mean_accuracy);
      } catch (const std::exception& e) {
        log << "failed: " << e.what() << '\n';
        if (cell.error.empty()) cell.error = "seed " + std::to_string(seed) + ": " + e.what();
      }
    }
    double sum = 0.0;
    for (double m : cell.metrics) sum += m;
    cell.mean = cell.metrics.empty() ? 0.0 : sum / static_cast<double>(cell.metrics.size());
    results.push_back(std::move(cell));
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream table(out / table_name, std::ios::binary);
  if (!table) throw ConfigError("cannot write '" + (out / table_name).string() + "'");
  write_cells_csv(table, results);
  return results;
}

std::vector<CellResult> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                   const fs::path& out, std::ostream& log) {
  std::vector<std::pair<std::string, RunConfig>> cells;
  for (const ModeFlags& f : ablation_grid(base.mode)) {
    RunConfig c = base;
    c.mode = f;
    cells.emplace_back(cell_name(f), c);
  }
  return run_cells(cells, seeds, out, "ablation.csv", log);
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lambda") return SweepParam::kLambda;
  if (name == "r") return SweepParam::kRate;
  throw ConfigError("unknown sweep parameter '" + name + "' (lambda|r)");
}

std::string to_string(SweepParam p) { return p == SweepParam::kLambda ? "lambda" : "r"; }

std::vector<CellResult> cmd_sweep(const RunConfig& base, SweepParam param,
                                  const std::vector<double>& values,
                                  const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                  bool with_sfda, std::ostream& log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<std::pair<std::string, RunConfig>> cells;
  for (double v : values) {
    RunConfig c = base;
    if (param == SweepParam::kLambda) {
      c.mode.lambda = v;
    } else {
      c.federation.rounds_per_epoch = v;
      c.federation.sfda = false;
    }
    c.validate();
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%g", to_string(param).c_str(), v);
    cells.emplace_back(buf, c);
  }
  if (with_sfda && param == SweepParam::kRate) {
    RunConfig c = base;
    c.federation.sfda = true;
    cells.emplace_back("sfda", c);
  }
  return run_cells(cells, seeds, out, "sweep_" + to_string(param) + ".csv", log);
}

void cmd_generate(const RunConfig& config, const fs::path& out, std::ostream& log) {
  const auto sc = scenario::generate_scenario(config.scenario, config.seed);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create '" + out.string() + "': " + ec.message());
  auto dump = [&](const fs::path& p, const scenario::DomainDataset& d,
                  std::span<const scenario::ClassId> set) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    scenario::write_dataset(f, d, set);
    log << p.string() << ": " << d.size() << " samples\n";
  };
  for (std::size_t m = 0; m < sc.sources.size(); ++m) {
    dump(out / ("source_" + std::to_string(m) + ".txt"), sc.sources[m],
         sc.space.sources.source_classes(m));
  }
  dump(out / "target.txt", sc.target, sc.space.target);
}

void write_cells_csv(std::ostream& out, const std::vector<CellResult>& cells) {
  out << "cell,pseudo,gcld,mvd,mvd_view,lambda,r,sfda,seeds,mean_accuracy,per_seed,status\n";
  for (const auto& c : cells) {
    const auto& m = c.config.mode;
    std::string per_seed;
    for (std::size_t i = 0; i < c.metrics.size(); ++i) {
      if (i) per_seed += ';';
      per_seed += num(c.metrics[i]);
    }
    std::string status = c.ok() ? "ok" : c.error;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    out << c.name << ',' << to_string(m.pseudo) << ',' << (m.gcld ? 1 : 0) << ','
        << (m.mvd ? 1 : 0) << ',' << mvd::to_string(m.mvd_view) << ',' << num(m.lambda) << ','
        << num(c.config.federation.rounds_per_epoch) << ',' << (c.config.federation.sfda ? 1 : 0)
        << ',' << c.seeds.size() << ',' << num(c.mean) << ',' << per_seed << ',' << status
        << '\n';
  }
}

}  // namespace ufda::cli
