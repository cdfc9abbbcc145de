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

// Protocol orchestration: round scheduling, query exchange with the source
// clients, target training, mutual voting and evaluation.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ufda/config.hpp"
#include "ufda/gcld.hpp"
#include "ufda/mvd.hpp"
#include "ufda/source_client.hpp"

namespace ufda::federation {

using scenario::ClassId;
using source_client::QueryMode;
using source_client::QueryRequest;
using source_client::QueryResponse;

// ---------------------------------------------------------------------------
// Transport

// The only channel between the target client and the sources.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::size_t num_clients() const = 0;
  virtual QueryResponse send(const QueryRequest& request) = 0;
};

// Direct calls into live clients.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(const std::vector<source_client::SourceClient>& clients)
      : clients_(clients) {}
  std::size_t num_clients() const override { return clients_.size(); }
  QueryResponse send(const QueryRequest& request) override;

 protected:
  const std::vector<source_client::SourceClient>& clients_;
};

// Same as InProcessTransport but every request and response goes through the
// JSON-line encoding. Counts the bytes exchanged.
class LineTransport : public InProcessTransport {
 public:
  using InProcessTransport::InProcessTransport;
  QueryResponse send(const QueryRequest& request) override;
  std::size_t bytes_sent() const { return bytes_sent_; }
  std::size_t bytes_received() const { return bytes_received_; }

 private:
  std::size_t bytes_sent_ = 0;
  std::size_t bytes_received_ = 0;
};

// Fans the batch out to every client and returns the responses in client-id
// order. Throws ProtocolError on an error response, a size mismatch or a
// client id mismatch.
std::vector<QueryResponse> query_sources(Transport& transport, const numkit::Matrix& batch,
                                         QueryMode mode);

// Label-set descriptors carried by the responses.
scenario::SourceLabelSets label_sets_from(const std::vector<QueryResponse>& responses);

// Argmax votes per source (local indices). Soft responses vote by argmax.
std::vector<std::vector<std::size_t>> votes_from(const std::vector<QueryResponse>& responses);

// PHL from one-hot responses or PSL from soft responses.
numkit::Matrix pseudo_labels_from(const std::vector<QueryResponse>& responses,
                                  const scenario::SourceLabelSets& space);

// ---------------------------------------------------------------------------
// Round schedule

struct RoundEvent {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  bool operator==(const RoundEvent&) const = default;
};

struct RoundSchedule {
  double rate = 1.0;
  std::size_t epochs = 1;
  std::size_t batches_per_epoch = 1;
  std::vector<RoundEvent> events;  // sorted

  // Number of events at (epoch, batch).
  std::size_t count_at(std::size_t epoch, std::size_t batch) const;
};

// round(r * E) events; event j sits at t = j / r epochs, i.e. epoch floor(t)
// and batch floor(frac(t) * batches_per_epoch). Throws ConfigError for r <= 0,
// epochs == 0 or batches_per_epoch == 0.
RoundSchedule schedule_rounds(double r, std::size_t epochs, std::size_t batches_per_epoch);

// ---------------------------------------------------------------------------
// Evaluation

struct ClassAccuracy {
  ClassId cls = 0;  // mvd::kUnknownClass for the unknown bucket
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // percent
};

struct Metrics {
  double mean_accuracy = 0.0;  // percent over the non-empty buckets
  std::vector<ClassAccuracy> per_class;  // shared classes ascending, unknown last
  std::vector<std::string> warnings;
};

// Mean per-class accuracy over the shared classes plus one unknown bucket.
// Truth labels in the target-unknown set belong to the unknown bucket; a
// bucket without samples is skipped and reported in `warnings`.
Metrics evaluate(std::span<const ClassId> predictions, std::span<const ClassId> truth,
                 const scenario::LabelSpace& space);

// ---------------------------------------------------------------------------
// Experiment

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_cls = 0.0;
  double loss_cont = 0.0;
  std::size_t num_shared = 0;
  std::size_t num_unknown = 0;
  std::size_t events = 0;
  double pseudo_label_accuracy = 0.0;  // percent, after the epoch
  double classifier_accuracy = 0.0;    // percent, same samples as above
};

struct ExperimentReport {
  RunConfig config;
  Metrics metrics;
  std::optional<mvd::VotingTable> voting;
  double initial_pseudo_label_accuracy = 0.0;
  std::vector<EpochRecord> epochs;
  std::vector<double> source_accuracy;  // local training accuracy at the end
  std::size_t communication_events = 0;
  std::size_t target_samples = 0;
  numkit::Matrix initial_pseudo_labels;
  numkit::Matrix final_pseudo_labels;
  double wall_clock_seconds = 0.0;  // not written to report files
};

// Accuracy (percent) of argmax pseudo-labels over samples whose true class
// is shared.
double pseudo_label_accuracy(const numkit::Matrix& labels, std::span<const ClassId> truth,
                             const scenario::LabelSpace& space,
                             const scenario::SourceLabelSets& union_space);

ExperimentReport run_experiment(const RunConfig& config);

inline constexpr const char* kReportSchema = "ufda-report/1";

nlohmann::json report_to_json(const ExperimentReport& report);

// report.json, epochs.csv, per_class.csv, voting.csv (when MVD ran) and the
// pseudo-label CSVs when requested. Creates `dir`.
void write_report(const std::filesystem::path& dir, const ExperimentReport& report);

}  // namespace ufda::federation
