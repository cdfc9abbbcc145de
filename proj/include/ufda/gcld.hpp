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

// Label disambiguation on the target client: a class-similarity memory bank,
// entropy-based two-component GMM sample division, momentum prototypes, an
// embedding queue, the contrastive + classification objective, and the
// per-epoch training loop that ties them together.

#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ufda/numkit.hpp"
#include "ufda/pseudo_label.hpp"

namespace ufda::gcld {

using numkit::Matrix;
using numkit::Rng;
using numkit::Vec;
using pseudo_label::Division;

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
  double noise_std = 0.1;
  double drop_prob = 0.1;
};

// x + N(0, noise_std^2), then each coordinate zeroed with probability
// drop_prob.
Vec augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Entropy and GMM division

// Entropy of a distribution (0 log 0 := 0).
double self_entropy(std::span<const double> row);

struct GmmComponent {
  double weight = 0.5;
  double mean = 0.0;
  double variance = 1.0;
};

struct GmmFit {
  // components[0] has the smaller mean.
  std::array<GmmComponent, 2> components;
  // Posterior of the low-mean component for each input value.
  Vec posterior_low;
  // Total log-likelihood after each E-step, in iteration order.
  Vec log_likelihood;
  std::size_t iterations = 0;
  bool degenerate = false;
};

struct GmmOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

// EM for a 1-D two-component mixture. Needs >= 4 finite values (ConfigError
// otherwise). Identical values yield a degenerate fit: equal means and all
// posteriors 0.5.
GmmFit fit_gmm2(std::span<const double> values, const GmmOptions& options = {});

// W1 iff posterior_low >= sigma. Throws ConfigError for sigma outside [0,1].
std::vector<Division> divide_samples(const GmmFit& fit, double sigma);

// ---------------------------------------------------------------------------
// Prototypes, memory bank, queue

class PrototypeSet {
 public:
  PrototypeSet() = default;
  // Rows are normalized on construction.
  PrototypeSet(Matrix prototypes, double gamma);
  static PrototypeSet random(std::size_t num_classes, std::size_t dim, double gamma, Rng& rng);

  std::size_t num_classes() const { return mu_.rows(); }
  std::size_t dim() const { return mu_.cols(); }
  double gamma() const { return gamma_; }
  std::span<const double> prototype(std::size_t c) const { return mu_.row(c); }
  const Matrix& matrix() const { return mu_; }

  // mu_c <- normalize(gamma mu_c + (1 - gamma) q).
  void pull(std::size_t c, std::span<const double> q);

  bool operator==(const PrototypeSet&) const = default;

 private:
  Matrix mu_;
  double gamma_ = 0.99;
};

// Moves the prototype of argmax(f_out) toward q. q must be unit-norm.
void update_prototypes(PrototypeSet& protos, std::span<const double> q,
                       const numkit::ProbVector& f_out);

class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(Matrix rows, double delta);
  // Rows start as random unit vectors.
  static MemoryBank random(std::size_t num_samples, std::size_t num_classes, double delta,
                           Rng& rng);

  std::size_t num_samples() const { return rows_.rows(); }
  std::size_t num_classes() const { return rows_.cols(); }
  double delta() const { return delta_; }
  const Matrix& rows() const { return rows_; }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }

  // row_i <- delta candidate + (1 - delta) row_i.
  void mix(std::size_t i, std::span<const double> candidate);

  // Softmax of every row (temperature 1).
  Matrix normalized() const;
  // Self-entropy of every normalized row.
  Vec entropies() const;

  bool operator==(const MemoryBank&) const = default;

 private:
  Matrix rows_;
  double delta_ = 0.9;
};

// Candidate row (q . mu_c for every class) mixed into row i.
void bank_row_update(MemoryBank& bank, std::size_t i, std::span<const double> q,
                     const PrototypeSet& protos);

// FIFO of (key embedding, predicted class) with fixed capacity.
class EmbeddingQueue {
 public:
  struct Entry {
    Vec key;
    std::size_t label = 0;
    bool operator==(const Entry&) const = default;
  };

  explicit EmbeddingQueue(std::size_t capacity = 512);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  const std::deque<Entry>& entries() const { return entries_; }

  // Appends; evicts the oldest entry when full.
  void push(Vec key, std::size_t label);

  bool operator==(const EmbeddingQueue&) const = default;

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Contrastive objective

// Embeddings and their predicted labels. Members are treated as constants:
// the loss is differentiated with respect to the anchor only.
struct ContrastivePool {
  Matrix embeddings;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

struct ContrastiveResult {
  double loss = 0.0;
  Vec grad_q;
  std::size_t num_positives = 0;
};

// Supervised contrastive loss of anchor q against pool \ {exclude}; the
// positives are the remaining members whose label equals q_label. An empty
// positive set gives zero loss and gradient. Throws ConfigError for tau <= 0
// and InvariantError when the contrast set is empty.
ContrastiveResult contrastive_loss(std::span<const double> q, const ContrastivePool& pool,
                                   std::optional<std::size_t> exclude, std::size_t q_label,
                                   double tau);

// ---------------------------------------------------------------------------
// Target model

struct TargetArch {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 64;
  std::size_t embed_dim = 128;
  std::size_t num_classes = 2;
};

// Query encoder g = projection o backbone, key encoder g' (momentum copy of g)
// and classifier f = classifier o backbone.
struct TargetModel {
  numkit::Mlp backbone;    // input -> hidden -> feature, ReLU
  numkit::Mlp classifier;  // feature -> classes, linear
  numkit::Mlp projection;  // feature -> feature (ReLU) -> embed
  numkit::Mlp key_backbone;
  numkit::Mlp key_projection;
  double encoder_momentum = 0.999;

  static TargetModel create(const TargetArch& arch, double encoder_momentum, Rng& rng);

  std::size_t num_classes() const { return classifier.output_dim(); }
  Vec logits(std::span<const double> x) const;
  Vec query_embedding(std::span<const double> x) const;
  Vec key_embedding(std::span<const double> x) const;

  // g' <- m g' + (1 - m) g.
  void momentum_update();
};

// Gradient buffers matching the trainable (query-side) parameters.
struct TargetGradients {
  Vec backbone;
  Vec classifier;
  Vec projection;

  explicit TargetGradients(const TargetModel& model);
  void zero();
};

struct SampleLoss {
  double cls = 0.0;
  double cont = 0.0;
  double total(double beta) const { return cls + beta * cont; }
};

// Loss of one query view: cross-entropy of f against `target` plus beta times
// the contrastive loss of normalize(g(x)) against `pool` (with `exclude`
// removed) using `label` for positives. When `grads` is non-null, adds
// scale * dL/dtheta into it.
SampleLoss sample_objective(const TargetModel& model, std::span<const double> x,
                            std::span<const double> target, const ContrastivePool* pool,
                            std::optional<std::size_t> exclude, std::size_t label, double tau,
                            double beta, double scale, TargetGradients* grads);

// ---------------------------------------------------------------------------
// Training loop

struct GcldHyper {
  bool enabled = true;  // false: classifier-only training on fixed pseudo-labels
  double phi = 0.9;
  double delta = 0.9;
  double sigma = 0.5;
  double tau = 0.07;
  double gamma = 0.99;
  double beta = 0.01;
  double lr = 0.005;
  double momentum = 0.9;
  double encoder_momentum = 0.999;
  std::size_t queue_capacity = 512;
  std::size_t batch_size = 64;
  // Restrict the sharpening target to classes some source voted for.
  bool candidate_targets = false;
  AugmentConfig augment;
};

struct TrainingState {
  TargetModel model;
  numkit::OptimizerState opt_backbone;
  numkit::OptimizerState opt_classifier;
  numkit::OptimizerState opt_projection;
  pseudo_label::PseudoLabelState labels;
  MemoryBank bank;
  PrototypeSet protos;
  EmbeddingQueue queue;
  std::size_t step = 0;
  std::size_t total_steps = 1;

  // Fresh model, bank and prototypes for `initial_labels.rows()` samples.
  static TrainingState create(const TargetArch& arch, numkit::Matrix initial_labels,
                              const GcldHyper& hyper, std::size_t total_steps, Rng& rng);
};

struct EpochStats {
  double loss_cls = 0.0;   // mean over samples
  double loss_cont = 0.0;  // mean over samples
  std::size_t num_shared = 0;   // |W1|
  std::size_t num_unknown = 0;  // |W0|
  std::optional<GmmFit> gmm;    // absent when disambiguation is off
};

std::size_t batches_per_epoch(std::size_t num_samples, std::size_t batch_size);

// Called with the batch index before each minibatch; may modify the
// pseudo-labels (communication events).
using BatchHook = std::function<void(std::size_t batch, pseudo_label::PseudoLabelState&)>;

// One pass over the target features in a shuffled order. With disambiguation
// enabled this also maintains prototypes, bank and queue, and ends with the
// entropy -> GMM -> division -> pseudo-target update sequence.
EpochStats train_epoch(TrainingState& state, const Matrix& features, const GcldHyper& hyper,
                       Rng& rng, const BatchHook& hook = {});

}  // namespace ufda::gcld
