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

#include "ufda/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "ufda/error.hpp"

namespace ufda::federation {

using numkit::Matrix;
using numkit::Vec;
using nlohmann::json;

QueryResponse InProcessTransport::send(const QueryRequest& request) {
  if (request.client_id >= clients_.size()) {
    throw ProtocolError("no source client with id " + std::to_string(request.client_id));
  }
  return clients_[request.client_id].handle(request);
}

QueryResponse LineTransport::send(const QueryRequest& request) {
  const std::string out = source_client::to_line(request);
  bytes_sent_ += out.size();
  const QueryRequest decoded = source_client::parse_request_line(out);
  const std::string back = source_client::to_line(InProcessTransport::send(decoded));
  bytes_received_ += back.size();
  return source_client::parse_response_line(back);
}

std::vector<QueryResponse> query_sources(Transport& transport, const Matrix& batch,
                                         QueryMode mode) {
  std::vector<QueryResponse> out;
  out.reserve(transport.num_clients());
  for (std::size_t m = 0; m < transport.num_clients(); ++m) {
    QueryResponse r = transport.send(QueryRequest{m, mode, batch});
    if (!r.ok()) throw ProtocolError("source " + std::to_string(m) + ": " + r.error);
    if (r.client_id != m) throw ProtocolError("response from the wrong client");
    if (r.mode != mode) throw ProtocolError("response mode differs from the request");
    if (r.size() != batch.rows()) throw ProtocolError("response size differs from the batch");
    out.push_back(std::move(r));
  }
  return out;
}

scenario::SourceLabelSets label_sets_from(const std::vector<QueryResponse>& responses) {
  std::vector<std::vector<ClassId>> sets;
  sets.reserve(responses.size());
  for (const auto& r : responses) sets.push_back(r.label_set);
  return scenario::SourceLabelSets(std::move(sets));
}

std::vector<std::vector<std::size_t>> votes_from(const std::vector<QueryResponse>& responses) {
  std::vector<std::vector<std::size_t>> votes;
  votes.reserve(responses.size());
  for (const auto& r : responses) {
    if (r.mode == QueryMode::kOneHot) {
      votes.push_back(r.labels);
      continue;
    }
    std::vector<std::size_t> v(r.probs.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = numkit::argmax(r.probs[i]);
    votes.push_back(std::move(v));
  }
  return votes;
}

Matrix pseudo_labels_from(const std::vector<QueryResponse>& responses,
                          const scenario::SourceLabelSets& space) {
  if (responses.empty()) throw ProtocolError("no source responses");
  if (responses.front().mode == QueryMode::kOneHot) {
    return pseudo_label::generate_phl(votes_from(responses), space);
  }
  std::vector<std::vector<Vec>> soft;
  soft.reserve(responses.size());
  for (const auto& r : responses) {
    if (r.mode != QueryMode::kSoft) throw ProtocolError("mixed response modes");
    soft.push_back(r.probs);
  }
  return pseudo_label::generate_psl(soft, space);
}

// ---------------------------------------------------------------------------

std::size_t RoundSchedule::count_at(std::size_t epoch, std::size_t batch) const {
  return static_cast<std::size_t>(
      std::count(events.begin(), events.end(), RoundEvent{epoch, batch}));
}

RoundSchedule schedule_rounds(double r, std::size_t epochs, std::size_t batches_per_epoch) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("communication rate r must be > 0");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batches_per_epoch == 0) throw ConfigError("batches_per_epoch must be >= 1");
  RoundSchedule s{r, epochs, batches_per_epoch, {}};
  const auto count = static_cast<std::size_t>(std::llround(r * static_cast<double>(epochs)));
  for (std::size_t j = 0; j < count; ++j) {
    const double t = static_cast<double>(j) / r;
    const auto epoch = static_cast<std::size_t>(std::floor(t + 1e-9));
    if (epoch >= epochs) break;
    const double frac = std::max(0.0, t - static_cast<double>(epoch));
    auto batch = static_cast<std::size_t>(
        std::floor(frac * static_cast<double>(batches_per_epoch) + 1e-9));
    batch = std::min(batch, batches_per_epoch - 1);
    s.events.push_back({epoch, batch});
  }
  return s;
}

// ---------------------------------------------------------------------------

Metrics evaluate(std::span<const ClassId> predictions, std::span<const ClassId> truth,
                 const scenario::LabelSpace& space) {
  if (predictions.size() != truth.size()) {
    throw ConfigError("evaluate: prediction and truth sizes differ");
  }
  Metrics m;
  std::vector<ClassId> shared = space.shared;
  std::sort(shared.begin(), shared.end());
  for (ClassId c : shared) m.per_class.push_back({c, 0, 0, 0.0});
  m.per_class.push_back({mvd::kUnknownClass, 0, 0, 0.0});
  auto& unknown = m.per_class.back();

  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (space.is_target_unknown(truth[i])) {
      ++unknown.total;
      if (predictions[i] == mvd::kUnknownClass) ++unknown.correct;
      continue;
    }
    auto it = std::lower_bound(shared.begin(), shared.end(), truth[i]);
    if (it == shared.end() || *it != truth[i]) {
      throw ConfigError("evaluate: truth label " + std::to_string(truth[i]) +
                        " is not a target class");
    }
    auto& bucket = m.per_class[static_cast<std::size_t>(it - shared.begin())];
    ++bucket.total;
    if (predictions[i] == truth[i]) ++bucket.correct;
  }

  double sum = 0.0;
  std::size_t used = 0;
  for (auto& b : m.per_class) {
    if (b.total == 0) {
      m.warnings.push_back(b.cls == mvd::kUnknownClass
                               ? std::string("unknown bucket has no samples; skipped")
                               : "class " + std::to_string(b.cls) + " has no samples; skipped");
      continue;
    }
    b.accuracy = 100.0 * static_cast<double>(b.correct) / static_cast<double>(b.total);
    sum += b.accuracy;
    ++used;
  }
  m.mean_accuracy = used ? sum / static_cast<double>(used) : 0.0;
  return m;
}

double pseudo_label_accuracy(const Matrix& labels, std::span<const ClassId> truth,
                             const scenario::LabelSpace& space,
                             const scenario::SourceLabelSets& union_space) {
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!space.is_shared(truth[i])) continue;
    ++total;
    if (union_space.union_class(numkit::argmax(labels.row(i))) == truth[i]) ++correct;
  }
  return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> target_predictions(const gcld::TargetModel& model, const Matrix& x) {
  std::vector<std::size_t> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = numkit::argmax(model.logits(x.row(i)));
  return out;
}

double classifier_accuracy(const gcld::TargetModel& model, const Matrix& x,
                           std::span<const ClassId> truth, const scenario::LabelSpace& space,
                           const scenario::SourceLabelSets& union_space) {
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!space.is_shared(truth[i])) continue;
    ++total;
    if (union_space.union_class(numkit::argmax(model.logits(x.row(i)))) == truth[i]) ++correct;
  }
  return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace

ExperimentReport run_experiment(const RunConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.config = config;

  const scenario::Scenario sc = scenario::generate_scenario(config.scenario, config.seed);
  const Matrix& target_x = sc.target.features;
  report.target_samples = sc.target.size();

  std::vector<source_client::SourceClient> clients;
  clients.reserve(sc.sources.size());
  const source_client::LocalTrainConfig local{config.source.batch_size, config.source.lr,
                                              config.source.momentum};
  for (std::size_t m = 0; m < sc.sources.size(); ++m) {
    const auto classes = sc.space.sources.source_classes(m);
    clients.emplace_back(m, sc.sources[m], std::vector<ClassId>(classes.begin(), classes.end()),
                         config.source.hidden_dim, local, config.seed);
    clients.back().advance(config.source.initial_steps);
  }

  std::unique_ptr<Transport> transport;
  if (config.federation.serialize_messages) {
    transport = std::make_unique<LineTransport>(clients);
  } else {
    transport = std::make_unique<InProcessTransport>(clients);
  }

  const QueryMode mode =
      config.mode.pseudo == PseudoLabelMode::kPhl ? QueryMode::kOneHot : QueryMode::kSoft;
  std::vector<QueryResponse> latest = query_sources(*transport, target_x, mode);
  const scenario::SourceLabelSets union_space = label_sets_from(latest);
  Matrix initial = pseudo_labels_from(latest, union_space);
  report.initial_pseudo_labels = initial;
  report.initial_pseudo_label_accuracy =
      pseudo_label_accuracy(initial, sc.target.labels, sc.space, union_space);

  gcld::GcldHyper hyper = config.target.hyper;
  hyper.enabled = config.mode.gcld;
  const gcld::TargetArch arch{sc.target.dim(), config.target.hidden_dim,
                              config.target.feature_dim, config.target.embed_dim,
                              union_space.num_union()};
  const std::size_t nb = gcld::batches_per_epoch(target_x.rows(), hyper.batch_size);
  const std::size_t epochs = config.target.epochs;
  numkit::Rng init_rng = scenario::derive_rng(config.seed, 3000);
  numkit::Rng train_rng = scenario::derive_rng(config.seed, 3001);
  gcld::TrainingState state =
      gcld::TrainingState::create(arch, std::move(initial), hyper, epochs * nb, init_rng);
  if (hyper.candidate_targets) {
    pseudo_label::merge_candidates(state.labels,
                                   pseudo_label::candidate_mask(votes_from(latest), union_space));
  }

  RoundSchedule schedule;
  if (!config.federation.sfda) {
    schedule = schedule_rounds(config.federation.rounds_per_epoch, epochs, nb);
  }

  for (std::size_t e = 0; e < epochs; ++e) {
    std::size_t events_this_epoch = 0;
    const gcld::BatchHook hook = [&](std::size_t b, pseudo_label::PseudoLabelState& labels) {
      for (std::size_t k = schedule.count_at(e, b); k > 0; --k) {
        for (auto& c : clients) c.advance(config.source.steps_per_round);
        latest = query_sources(*transport, target_x, mode);
        if (!(label_sets_from(latest) == union_space)) {
          throw ProtocolError("source label sets changed between rounds");
        }
        pseudo_label::blend_fresh(labels, pseudo_labels_from(latest, union_space), hyper.phi);
        if (hyper.candidate_targets) {
          pseudo_label::merge_candidates(
              labels, pseudo_label::candidate_mask(votes_from(latest), union_space));
        }
        ++events_this_epoch;
      }
    };
    const gcld::EpochStats stats = gcld::train_epoch(state, target_x, hyper, train_rng, hook);
    if (!state.labels.valid()) throw InvariantError("pseudo-labels left the simplex");
    report.communication_events += events_this_epoch;
    report.epochs.push_back({e, stats.loss_cls, stats.loss_cont, stats.num_shared,
                             stats.num_unknown, events_this_epoch,
                             pseudo_label_accuracy(state.labels.current, sc.target.labels,
                                                   sc.space, union_space),
                             classifier_accuracy(state.model, target_x, sc.target.labels,
                                                 sc.space, union_space)});
  }
  report.final_pseudo_labels = state.labels.current;

  const std::vector<std::size_t> preds = target_predictions(state.model, target_x);
  std::vector<ClassId> final_labels;
  if (config.mode.mvd) {
    const mvd::ClusterTable table = mvd::build_clusters(votes_from(latest), preds, union_space);
    report.voting = mvd::decide(table, union_space, config.mode.lambda, config.mode.mvd_view);
    final_labels = mvd::final_predict(preds, report.voting->verdict, union_space);
  } else {
    final_labels.reserve(preds.size());
    for (std::size_t p : preds) final_labels.push_back(union_space.union_class(p));
  }
  report.metrics = evaluate(final_labels, sc.target.labels, sc.space);
  for (const auto& c : clients) report.source_accuracy.push_back(100.0 * c.local_accuracy());

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------

json report_to_json(const ExperimentReport& r) {
  json j;
  j["schema"] = kReportSchema;
  j["seed"] = r.config.seed;
  j["config"] = to_json(r.config);
  j["mean_accuracy"] = r.metrics.mean_accuracy;
  json per_class = json::array();
  for (const auto& c : r.metrics.per_class) {
    per_class.push_back({{"class", c.cls},
                         {"correct", c.correct},
                         {"total", c.total},
                         {"accuracy", c.accuracy}});
  }
  j["per_class"] = per_class;
  j["warnings"] = r.metrics.warnings;
  if (r.voting) {
    json rows = json::array();
    const auto& v = *r.voting;
    for (std::size_t i = 0; i < v.classes.size(); ++i) {
      rows.push_back({{"class", v.classes[i]},
                      {"d_s", v.d_s[i]},
                      {"d_t", v.d_t[i]},
                      {"S", v.mutual[i]},
                      {"verdict", v.verdict[i] == mvd::Verdict::kShared ? "shared" : "unknown"}});
    }
    j["voting"] = rows;
  } else {
    j["voting"] = nullptr;
  }
  j["initial_pseudo_label_accuracy"] = r.initial_pseudo_label_accuracy;
  json curve = json::array();
  for (const auto& e : r.epochs) curve.push_back(e.pseudo_label_accuracy);
  j["pseudo_label_accuracy"] = curve;
  j["source_accuracy"] = r.source_accuracy;
  j["communication_events"] = r.communication_events;
  j["target_samples"] = r.target_samples;
  return j;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace

void write_report(const std::filesystem::path& dir, const ExperimentReport& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create '" + dir.string() + "': " + ec.message());

  open_out(dir / "report.json") << report_to_json(r).dump(2) << '\n';

  {
    auto out = open_out(dir / "epochs.csv");
    out << "epoch,loss_cls,loss_cont,num_shared,num_unknown,events,pseudo_label_accuracy,"
           "classifier_accuracy\n";
    for (const auto& e : r.epochs) {
      out << e.epoch << ',' << num(e.loss_cls) << ',' << num(e.loss_cont) << ','
          << e.num_shared << ',' << e.num_unknown << ',' << e.events << ','
          << num(e.pseudo_label_accuracy) << ',' << num(e.classifier_accuracy) << '\n';
    }
  }
  {
    auto out = open_out(dir / "per_class.csv");
    out << "class,correct,total,accuracy\n";
    for (const auto& c : r.metrics.per_class) {
      out << (c.cls == mvd::kUnknownClass ? std::string("unknown") : std::to_string(c.cls))
          << ',' << c.correct << ',' << c.total << ',' << num(c.accuracy) << '\n';
    }
  }
  if (r.voting) {
    auto out = open_out(dir / "voting.csv");
    mvd::write_csv(out, *r.voting);
  }
  if (r.config.dump_pseudo_labels) {
    auto a = open_out(dir / "pseudo_labels_initial.csv");
    pseudo_label::write_csv(a, r.initial_pseudo_labels);
    auto b = open_out(dir / "pseudo_labels_final.csv");
    pseudo_label::write_csv(b, r.final_pseudo_labels);
  }
}

}  // namespace ufda::federation
