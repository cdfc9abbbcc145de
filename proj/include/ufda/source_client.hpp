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

// Simulated source client. Owns private labeled data and a local model; the
// outside world only sees QueryRequest -> QueryResponse and the label set.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ufda/numkit.hpp"
#include "ufda/scenario.hpp"

namespace ufda::source_client {

using scenario::ClassId;

enum class QueryMode { kOneHot, kSoft };

std::string to_string(QueryMode mode);
QueryMode parse_query_mode(std::string_view name);

struct QueryRequest {
  std::size_t client_id = 0;
  QueryMode mode = QueryMode::kOneHot;
  numkit::Matrix batch;  // B x d

  bool operator==(const QueryRequest&) const = default;
};

// In one-hot mode `labels` holds one local class index per sample; in soft
// mode `probs` holds one distribution over the local label set per sample.
// `label_set` lists the global class ids in local-index order. A non-empty
// `error` marks a rejected request; the payload is then empty.
struct QueryResponse {
  std::size_t client_id = 0;
  QueryMode mode = QueryMode::kOneHot;
  std::vector<std::size_t> labels;
  std::vector<numkit::Vec> probs;
  std::vector<ClassId> label_set;
  std::string error;

  bool ok() const { return error.empty(); }
  std::size_t size() const { return mode == QueryMode::kOneHot ? labels.size() : probs.size(); }

  bool operator==(const QueryResponse&) const = default;
};

// Canonical single-line JSON encoding (see docs/formats.md).
std::string to_line(const QueryRequest& request);
std::string to_line(const QueryResponse& response);
QueryRequest parse_request_line(std::string_view line);
QueryResponse parse_response_line(std::string_view line);

// Encoder (one ReLU hidden layer) followed by a linear head over the local
// label set.
struct SourceModel {
  numkit::Mlp encoder;
  numkit::Mlp head;
  std::size_t steps_completed = 0;

  static SourceModel create(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t num_classes, numkit::Rng& rng);

  std::size_t input_dim() const { return encoder.input_dim(); }
  std::size_t num_classes() const { return head.output_dim(); }
  numkit::Vec logits(std::span<const double> x) const;
};

struct LocalTrainConfig {
  std::size_t batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
};

// Per-model optimizer memory that persists between training calls.
struct LocalOptimizer {
  numkit::OptimizerState encoder;
  numkit::OptimizerState head;

  LocalOptimizer() = default;
  LocalOptimizer(const SourceModel& model, const LocalTrainConfig& cfg);
};

// Mean cross-entropy of the model over the given rows with local labels.
double batch_loss(const SourceModel& model, const numkit::Matrix& features,
                  std::span<const std::size_t> local_labels, std::span<const std::size_t> rows);

// `steps` minibatch SGD steps of cross-entropy. `local_labels[i]` is the local
// class of row i. Throws DivergenceError on a non-finite loss.
void train_local(SourceModel& model, LocalOptimizer& opt, const numkit::Matrix& features,
                 std::span<const std::size_t> local_labels, std::size_t steps,
                 const LocalTrainConfig& cfg, numkit::Rng& rng);

// Answers a query. Never exposes weights or gradients. A feature-dimension
// mismatch produces an error response rather than an exception.
QueryResponse predict(const SourceModel& model, std::span<const ClassId> label_set,
                      const QueryRequest& request);

// A source participant: private data + model + local optimizer.
class SourceClient {
 public:
  SourceClient(std::size_t client_id, scenario::DomainDataset data,
               std::vector<ClassId> label_set, std::size_t hidden_dim,
               LocalTrainConfig train_config, std::uint64_t seed);

  std::size_t id() const { return id_; }
  const std::vector<ClassId>& label_set() const { return label_set_; }
  std::size_t steps_completed() const { return model_.steps_completed; }

  // Continues local supervised training.
  void advance(std::size_t steps);
  // Local accuracy on the private training data, in [0,1].
  double local_accuracy() const;

  QueryResponse handle(const QueryRequest& request) const;

 private:
  std::size_t id_;
  scenario::DomainDataset data_;
  std::vector<std::size_t> local_labels_;
  std::vector<ClassId> label_set_;
  LocalTrainConfig train_config_;
  numkit::Rng rng_;
  SourceModel model_;
  LocalOptimizer opt_;
};

}  // namespace ufda::source_client
