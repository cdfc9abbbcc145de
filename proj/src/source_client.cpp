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

#include "ufda/source_client.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "ufda/error.hpp"

namespace ufda::source_client {

using json = nlohmann::json;
using numkit::Matrix;
using numkit::Vec;

std::string to_string(QueryMode mode) { return mode == QueryMode::kOneHot ? "onehot" : "soft"; }

QueryMode parse_query_mode(std::string_view name) {
  if (name == "onehot") return QueryMode::kOneHot;
  if (name == "soft") return QueryMode::kSoft;
  throw ProtocolError("unknown query mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw ProtocolError("batch must be an array of rows");
  if (j.empty()) return Matrix();
  const std::size_t cols = j.front().size();
  Matrix m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ProtocolError("ragged batch");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json parse_object(std::string_view line, std::string_view type) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != type) {
    throw ProtocolError("expected a '" + std::string(type) + "' record");
  }
  return j;
}

}  // namespace

std::string to_line(const QueryRequest& request) {
  json j;
  j["type"] = "query_request";
  j["client_id"] = request.client_id;
  j["mode"] = to_string(request.mode);
  j["batch"] = matrix_to_json(request.batch);
  return j.dump();
}

std::string to_line(const QueryResponse& response) {
  json j;
  j["type"] = "query_response";
  j["client_id"] = response.client_id;
  j["mode"] = to_string(response.mode);
  j["label_set"] = response.label_set;
  if (!response.ok()) {
    j["error"] = response.error;
  } else if (response.mode == QueryMode::kOneHot) {
    j["labels"] = response.labels;
  } else {
    j["probs"] = response.probs;
  }
  return j.dump();
}

QueryRequest parse_request_line(std::string_view line) {
  const json j = parse_object(line, "query_request");
  try {
    QueryRequest r;
    r.client_id = j.at("client_id").get<std::size_t>();
    r.mode = parse_query_mode(j.at("mode").get<std::string>());
    r.batch = matrix_from_json(j.at("batch"));
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad query_request: ") + e.what());
  }
}

QueryResponse parse_response_line(std::string_view line) {
  const json j = parse_object(line, "query_response");
  try {
    QueryResponse r;
    r.client_id = j.at("client_id").get<std::size_t>();
    r.mode = parse_query_mode(j.at("mode").get<std::string>());
    r.label_set = j.at("label_set").get<std::vector<ClassId>>();
    if (j.contains("error")) {
      r.error = j.at("error").get<std::string>();
    } else if (r.mode == QueryMode::kOneHot) {
      r.labels = j.at("labels").get<std::vector<std::size_t>>();
    } else {
      r.probs = j.at("probs").get<std::vector<Vec>>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad query_response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Model

SourceModel SourceModel::create(std::size_t input_dim, std::size_t hidden_dim,
                                std::size_t num_classes, numkit::Rng& rng) {
  SourceModel m;
  const std::size_t enc_dims[] = {input_dim, hidden_dim};
  const std::size_t head_dims[] = {hidden_dim, num_classes};
  m.encoder = numkit::Mlp::random(enc_dims, numkit::Activation::kRelu,
                                  numkit::Activation::kRelu, rng);
  m.head = numkit::Mlp::random(head_dims, numkit::Activation::kNone, numkit::Activation::kNone,
                               rng);
  return m;
}

Vec SourceModel::logits(std::span<const double> x) const {
  return numkit::forward(head, numkit::forward(encoder, x));
}

LocalOptimizer::LocalOptimizer(const SourceModel& model, const LocalTrainConfig& cfg)
    : encoder(model.encoder.num_params(), cfg.momentum, cfg.lr),
      head(model.head.num_params(), cfg.momentum, cfg.lr) {}

double batch_loss(const SourceModel& model, const Matrix& features,
                  std::span<const std::size_t> local_labels, std::span<const std::size_t> rows) {
  double total = 0.0;
  for (std::size_t r : rows) {
    const auto p = numkit::softmax(model.logits(features.row(r)));
    total -= std::log(std::max(p[local_labels[r]], numkit::kLogClamp));
  }
  return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

void train_local(SourceModel& model, LocalOptimizer& opt, const Matrix& features,
                 std::span<const std::size_t> local_labels, std::size_t steps,
                 const LocalTrainConfig& cfg, numkit::Rng& rng) {
  if (features.rows() != local_labels.size() || features.rows() == 0) {
    throw ConfigError("train_local: features and labels disagree or are empty");
  }
  if (features.cols() != model.input_dim()) throw ConfigError("train_local: feature dim");
  if (opt.encoder.velocity.size() != model.encoder.num_params() ||
      opt.head.velocity.size() != model.head.num_params()) {
    throw ConfigError("train_local: optimizer does not match model");
  }
  std::uniform_int_distribution<std::size_t> pick(0, features.rows() - 1);
  const std::size_t k = model.num_classes();
  Vec g_enc(model.encoder.num_params());
  Vec g_head(model.head.num_params());
  numkit::ForwardCache enc_cache, head_cache;

  for (std::size_t step = 0; step < steps; ++step) {
    std::fill(g_enc.begin(), g_enc.end(), 0.0);
    std::fill(g_head.begin(), g_head.end(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    double loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t r = pick(rng);
      const std::size_t y = local_labels[r];
      if (y >= k) throw ConfigError("train_local: label outside local label set");
      const Vec h = numkit::forward(model.encoder, features.row(r), &enc_cache);
      const Vec z = numkit::forward(model.head, h, &head_cache);
      const auto p = numkit::softmax(z);
      loss -= std::log(std::max(p[y], numkit::kLogClamp)) * inv_b;
      Vec dz(p.vec());
      dz[y] -= 1.0;
      for (double& v : dz) v *= inv_b;
      const Vec dh = numkit::backward(model.head, head_cache, dz, g_head);
      numkit::backward(model.encoder, enc_cache, dh, g_enc);
    }
    if (!std::isfinite(loss)) throw DivergenceError("source training loss is not finite");
    numkit::sgd_step(model.encoder.mutable_params(), g_enc, opt.encoder, cfg.lr);
    numkit::sgd_step(model.head.mutable_params(), g_head, opt.head, cfg.lr);
    ++model.steps_completed;
  }
}

QueryResponse predict(const SourceModel& model, std::span<const ClassId> label_set,
                      const QueryRequest& request) {
  QueryResponse resp;
  resp.client_id = request.client_id;
  resp.mode = request.mode;
  resp.label_set.assign(label_set.begin(), label_set.end());
  if (request.batch.rows() > 0 && request.batch.cols() != model.input_dim()) {
    resp.error = "feature dimension " + std::to_string(request.batch.cols()) +
                 " does not match model input " + std::to_string(model.input_dim());
    return resp;
  }
  for (std::size_t i = 0; i < request.batch.rows(); ++i) {
    const Vec z = model.logits(request.batch.row(i));
    if (request.mode == QueryMode::kOneHot) {
      resp.labels.push_back(numkit::argmax(z));
    } else {
      resp.probs.push_back(numkit::softmax(z).vec());
    }
  }
  return resp;
}

// ---------------------------------------------------------------------------

SourceClient::SourceClient(std::size_t client_id, scenario::DomainDataset data,
                           std::vector<ClassId> label_set, std::size_t hidden_dim,
                           LocalTrainConfig train_config, std::uint64_t seed)
    : id_(client_id),
      data_(std::move(data)),
      label_set_(std::move(label_set)),
      train_config_(train_config),
      rng_(scenario::derive_rng(seed, 1000 + client_id)) {
  std::sort(label_set_.begin(), label_set_.end());
  for (ClassId y : data_.labels) {
    auto it = std::lower_bound(label_set_.begin(), label_set_.end(), y);
    if (it == label_set_.end() || *it != y) {
      throw ConfigError("source data label outside the client's label set");
    }
    local_labels_.push_back(static_cast<std::size_t>(it - label_set_.begin()));
  }
  model_ = SourceModel::create(data_.dim(), hidden_dim, label_set_.size(), rng_);
  opt_ = LocalOptimizer(model_, train_config_);
}

void SourceClient::advance(std::size_t steps) {
  train_local(model_, opt_, data_.features, local_labels_, steps, train_config_, rng_);
}

double SourceClient::local_accuracy() const {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (numkit::argmax(model_.logits(data_.features.row(i))) == local_labels_[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data_.size());
}

QueryResponse SourceClient::handle(const QueryRequest& request) const {
  QueryResponse resp = predict(model_, label_set_, request);
  resp.client_id = id_;
  return resp;
}

}  // namespace ufda::source_client
