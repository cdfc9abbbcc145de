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

// Small deterministic numerics: dense vectors, fixed-graph MLPs with analytic
// gradients, momentum SGD, cosine schedule and probability helpers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ufda::numkit {

// Every random draw in the library goes through an explicitly passed engine.
using Rng = std::mt19937_64;

using Vec = std::vector<double>;

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
bool all_finite(std::span<const double> v);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

// Unit vector in the direction of v. Throws DegenerateInputError for a zero
// (or non-finite) vector.
Vec l2_normalize(std::span<const double> v);

// Backpropagates grad_unit through u = v / |v|.
Vec l2_normalize_backward(std::span<const double> v, std::span<const double> grad_unit);

// A distribution over n >= 1 outcomes: entries >= 0 summing to 1 within 1e-9.
class ProbVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Validates; throws InvariantError if the entries are not a distribution.
  explicit ProbVector(Vec entries);

  static ProbVector uniform(std::size_t n);
  static ProbVector onehot(std::size_t n, std::size_t k);

  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  std::span<const double> values() const { return entries_; }
  const Vec& vec() const { return entries_; }

  static bool is_valid(std::span<const double> v, double tol = kSumTolerance);

 private:
  Vec entries_;
};

// Max-subtracted softmax.
ProbVector softmax(std::span<const double> logits);

// Log clamp used by cross_entropy.
inline constexpr double kLogClamp = 1e-12;

// -sum target[n] * log(max(pred[n], kLogClamp)).
double cross_entropy(std::span<const double> target, std::span<const double> pred);
double cross_entropy(const ProbVector& target, const ProbVector& pred);

// Shannon entropy with 0 log 0 := 0.
double entropy(std::span<const double> p);

// ---------------------------------------------------------------------------
// Multilayer perceptron

enum class Activation { kRelu, kNone };

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kNone;
};

// Fully connected network whose parameters live in one flat buffer so that
// optimizers, EMA copies and finite-difference probes can treat them as a
// single vector. Layer l stores its weight [out x in] row-major followed by
// its bias [out].
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized network. Throws ConfigError if the dims do not chain.
  explicit Mlp(std::vector<LayerShape> layers);

  // Layer widths dims[0] -> dims[1] -> ... ; hidden layers use `hidden`,
  // the last layer uses `last`. Fan-in scaled uniform init.
  static Mlp random(std::span<const std::size_t> dims, Activation hidden, Activation last,
                    Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  const LayerShape& layer(std::size_t l) const { return layers_[l]; }
  std::size_t num_params() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  // Mutable access bumps the version so outstanding forward caches go stale.
  std::span<double> mutable_params();

  std::span<const double> weight(std::size_t l) const;
  std::span<const double> bias(std::size_t l) const;
  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const {
    return offsets_[l] + layers_[l].in * layers_[l].out;
  }

  std::uint64_t version() const { return version_; }

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  Vec params_;
  std::uint64_t version_ = 0;
};

// Activation trace recorded by forward() and consumed by backward().
struct ForwardCache {
  const Mlp* net = nullptr;
  std::uint64_t version = 0;
  std::vector<Vec> inputs;  // input to each layer
  std::vector<Vec> pre;     // pre-activation output of each layer
};

Vec forward(const Mlp& net, std::span<const double> x, ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(params) into `grads` (size net.num_params()) and
// returns d(loss)/d(input). Throws InvariantError if the cache does not come
// from a forward pass over the current parameters of `net`.
Vec backward(const Mlp& net, const ForwardCache& cache, std::span<const double> grad_out,
             std::span<double> grads);

// ---------------------------------------------------------------------------
// Optimization

struct OptimizerState {
  double momentum = 0.9;
  double base_lr = 0.005;
  Vec velocity;

  OptimizerState() = default;
  OptimizerState(std::size_t num_params, double momentum, double base_lr);
};

// Heavy-ball momentum: v <- m v + g ; p <- p - lr v.
// Throws DivergenceError on a non-finite gradient (parameters untouched).
void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              double lr);

// lr0 (1 + cos(pi step / total)) / 2.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

// Exponential moving average dst <- m dst + (1 - m) src.
void ema_update(std::span<double> dst, std::span<const double> src, double momentum);

}  // namespace ufda::numkit
