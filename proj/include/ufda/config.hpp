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
#include <string>
#include <string_view>

#include "json.hpp"
#include "ufda/gcld.hpp"
#include "ufda/mvd.hpp"
#include "ufda/scenario.hpp"

namespace ufda {

enum class PseudoLabelMode { kPhl, kPsl };

std::string to_string(PseudoLabelMode mode);
PseudoLabelMode parse_pseudo_mode(std::string_view name);

struct SourceSettings {
  std::size_t hidden_dim = 32;
  std::size_t batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t initial_steps = 40;    // before the first query
  std::size_t steps_per_round = 10;  // per communication event
};

struct TargetSettings {
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 64;
  std::size_t embed_dim = 128;
  std::size_t epochs = 30;
  gcld::GcldHyper hyper;  // `enabled` is driven by ModeFlags::gcld
};

struct FederationSettings {
  double rounds_per_epoch = 1.0;
  bool sfda = false;  // initial query only, no later communication
  bool serialize_messages = false;  // route every message through the line format
};

struct ModeFlags {
  PseudoLabelMode pseudo = PseudoLabelMode::kPhl;
  bool gcld = true;
  bool mvd = true;
  mvd::View mvd_view = mvd::View::kBoth;
  double lambda = 0.4;
};

struct RunConfig {
  std::uint64_t seed = 0;
  scenario::ScenarioConfig scenario;
  SourceSettings source;
  TargetSettings target;
  FederationSettings federation;
  ModeFlags mode;
  bool dump_pseudo_labels = false;
  std::string output_dir;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

inline constexpr int kConfigSchemaVersion = 1;

// Fully resolved config, every default spelled out.
nlohmann::json to_json(const RunConfig& cfg);
// Starts from defaults and applies `j`. Unknown keys are rejected with
// ConfigError, as are wrong types.
RunConfig config_from_json(const nlohmann::json& j);
// Reads a JSON file; // and /* */ comments are allowed.
RunConfig load_config(const std::string& path);
RunConfig parse_config(std::string_view text);

}  // namespace ufda
