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

#include "ufda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ufda/error.hpp"

namespace ufda {

using nlohmann::json;

std::string to_string(PseudoLabelMode mode) { return mode == PseudoLabelMode::kPhl ? "phl" : "psl"; }

PseudoLabelMode parse_pseudo_mode(std::string_view name) {
  if (name == "phl") return PseudoLabelMode::kPhl;
  if (name == "psl") return PseudoLabelMode::kPsl;
  throw ConfigError("unknown pseudo-label mode '" + std::string(name) + "' (phl|psl)");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid config: ") + what);
  };
  const auto& h = target.hyper;
  require(scenario.dim >= 2, "scenario.dim must be >= 2");
  require(scenario.n_per_class >= 1, "scenario.n_per_class must be >= 1");
  require(scenario.shift_strength >= 0.0 && scenario.shift_strength <= 1.0,
          "scenario.shift_strength must be in [0,1]");
  require(scenario.noise_std >= 0.0, "scenario.noise_std must be >= 0");
  require(scenario.anchor_min_distance > 0.0, "scenario.anchor_min_distance must be > 0");
  require(source.hidden_dim >= 1 && source.batch_size >= 1, "source sizes must be >= 1");
  require(source.lr > 0.0, "source.lr must be > 0");
  require(source.momentum >= 0.0 && source.momentum < 1.0, "source.momentum must be in [0,1)");
  require(target.epochs >= 1, "target.epochs must be >= 1");
  require(target.hidden_dim >= 1 && target.feature_dim >= 1 && target.embed_dim >= 1,
          "target widths must be >= 1");
  require(h.phi >= 0.0 && h.phi <= 1.0, "phi must be in [0,1]");
  require(h.delta >= 0.0 && h.delta <= 1.0, "delta must be in [0,1]");
  require(h.sigma >= 0.0 && h.sigma <= 1.0, "sigma must be in [0,1]");
  require(h.tau > 0.0, "tau must be > 0");
  require(h.gamma >= 0.0 && h.gamma <= 1.0, "gamma must be in [0,1]");
  require(h.beta >= 0.0, "beta must be >= 0");
  require(h.lr > 0.0, "lr must be > 0");
  require(h.momentum >= 0.0 && h.momentum < 1.0, "momentum must be in [0,1)");
  require(h.encoder_momentum >= 0.0 && h.encoder_momentum <= 1.0,
          "encoder_momentum must be in [0,1]");
  require(h.queue_capacity >= 1, "queue_capacity must be >= 1");
  require(h.batch_size >= 1, "batch_size must be >= 1");
  require(h.augment.noise_std >= 0.0, "augment noise must be >= 0");
  require(h.augment.drop_prob >= 0.0 && h.augment.drop_prob < 1.0,
          "augment drop probability must be in [0,1)");
  require(federation.rounds_per_epoch > 0.0, "rounds_per_epoch must be > 0");
  require(mode.lambda >= 0.0 && mode.lambda <= 1.0, "lambda must be in [0,1]");
}

json to_json(const RunConfig& c) {
  const auto& s = c.scenario;
  const auto& h = c.target.hyper;
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["scenario"] = {
      {"umda_matrix", {s.matrix.shared_counts, s.matrix.unknown_counts}},
      {"overlap_policy", scenario::to_string(s.overlap)},
      {"dim", s.dim},
      {"n_per_class", s.n_per_class},
      {"shift_strength", s.shift_strength},
      {"rotation_scale", s.rotation_scale},
      {"translation_scale", s.translation_scale},
      {"noise_std", s.noise_std},
      {"anchor_min_distance", s.anchor_min_distance},
  };
  j["source"] = {
      {"hidden_dim", c.source.hidden_dim},
      {"batch_size", c.source.batch_size},
      {"lr", c.source.lr},
      {"momentum", c.source.momentum},
      {"initial_steps", c.source.initial_steps},
      {"steps_per_round", c.source.steps_per_round},
  };
  j["target"] = {
      {"hidden_dim", c.target.hidden_dim},
      {"feature_dim", c.target.feature_dim},
      {"embed_dim", c.target.embed_dim},
      {"epochs", c.target.epochs},
      {"phi", h.phi},
      {"delta", h.delta},
      {"sigma", h.sigma},
      {"tau", h.tau},
      {"gamma", h.gamma},
      {"beta", h.beta},
      {"lr", h.lr},
      {"momentum", h.momentum},
      {"encoder_momentum", h.encoder_momentum},
      {"queue_capacity", h.queue_capacity},
      {"batch_size", h.batch_size},
      {"candidate_targets", h.candidate_targets},
      {"augment_noise", h.augment.noise_std},
      {"augment_drop", h.augment.drop_prob},
  };
  j["federation"] = {
      {"rounds_per_epoch", c.federation.rounds_per_epoch},
      {"sfda", c.federation.sfda},
      {"serialize_messages", c.federation.serialize_messages},
  };
  j["mode"] = {
      {"pseudo", to_string(c.mode.pseudo)},
      {"gcld", c.mode.gcld},
      {"mvd", c.mode.mvd},
      {"mvd_view", mvd::to_string(c.mode.mvd_view)},
      {"lambda", c.mode.lambda},
  };
  j["dump_pseudo_labels"] = c.dump_pseudo_labels;
  j["output_dir"] = c.output_dir;
  return j;
}

namespace {

// Reads known keys from one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + path_ + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + path_ + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  ObjectReader root(j, "");
  int version = kConfigSchemaVersion;
  root.get("schema_version", version);
  if (version != kConfigSchemaVersion) throw ConfigError("config: unsupported schema_version");
  root.get("seed", c.seed);
  root.get("dump_pseudo_labels", c.dump_pseudo_labels);
  root.get("output_dir", c.output_dir);

  if (const json* s = root.child("scenario")) {
    ObjectReader r(*s, "scenario.");
    std::vector<std::vector<int>> rows{c.scenario.matrix.shared_counts,
                                       c.scenario.matrix.unknown_counts};
    r.get("umda_matrix", rows);
    c.scenario.matrix = scenario::parse_umda_matrix(rows);
    std::string overlap = scenario::to_string(c.scenario.overlap);
    r.get("overlap_policy", overlap);
    c.scenario.overlap = scenario::parse_overlap_policy(overlap);
    r.get("dim", c.scenario.dim);
    r.get("n_per_class", c.scenario.n_per_class);
    r.get("shift_strength", c.scenario.shift_strength);
    r.get("rotation_scale", c.scenario.rotation_scale);
    r.get("translation_scale", c.scenario.translation_scale);
    r.get("noise_std", c.scenario.noise_std);
    r.get("anchor_min_distance", c.scenario.anchor_min_distance);
    r.finish();
  }
  if (const json* s = root.child("source")) {
    ObjectReader r(*s, "source.");
    r.get("hidden_dim", c.source.hidden_dim);
    r.get("batch_size", c.source.batch_size);
    r.get("lr", c.source.lr);
    r.get("momentum", c.source.momentum);
    r.get("initial_steps", c.source.initial_steps);
    r.get("steps_per_round", c.source.steps_per_round);
    r.finish();
  }
  if (const json* s = root.child("target")) {
    ObjectReader r(*s, "target.");
    auto& h = c.target.hyper;
    r.get("hidden_dim", c.target.hidden_dim);
    r.get("feature_dim", c.target.feature_dim);
    r.get("embed_dim", c.target.embed_dim);
    r.get("epochs", c.target.epochs);
    r.get("phi", h.phi);
    r.get("delta", h.delta);
    r.get("sigma", h.sigma);
    r.get("tau", h.tau);
    r.get("gamma", h.gamma);
    r.get("beta", h.beta);
    r.get("lr", h.lr);
    r.get("momentum", h.momentum);
    r.get("encoder_momentum", h.encoder_momentum);
    r.get("queue_capacity", h.queue_capacity);
    r.get("batch_size", h.batch_size);
    r.get("candidate_targets", h.candidate_targets);
    r.get("augment_noise", h.augment.noise_std);
    r.get("augment_drop", h.augment.drop_prob);
    r.finish();
  }
  if (const json* s = root.child("federation")) {
    ObjectReader r(*s, "federation.");
    r.get("rounds_per_epoch", c.federation.rounds_per_epoch);
    r.get("sfda", c.federation.sfda);
    r.get("serialize_messages", c.federation.serialize_messages);
    r.finish();
  }
  if (const json* s = root.child("mode")) {
    ObjectReader r(*s, "mode.");
    std::string pseudo = to_string(c.mode.pseudo);
    std::string view = mvd::to_string(c.mode.mvd_view);
    r.get("pseudo", pseudo);
    r.get("gcld", c.mode.gcld);
    r.get("mvd", c.mode.mvd);
    r.get("mvd_view", view);
    r.get("lambda", c.mode.lambda);
    c.mode.pseudo = parse_pseudo_mode(pseudo);
    c.mode.mvd_view = mvd::parse_view(view);
    r.finish();
  }
  root.finish();
  c.target.hyper.enabled = c.mode.gcld;
  c.validate();
  return c;
}

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ufda
