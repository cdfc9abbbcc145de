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

#include "ufda/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ufda/error.hpp"

namespace ufda::numkit {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ConfigError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DegenerateInputError("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Vec l2_normalize(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DegenerateInputError("l2_normalize: zero or non-finite vector");
  }
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

Vec l2_normalize_backward(std::span<const double> v, std::span<const double> grad_unit) {
  // du/dv = (I - u u^T) / |v|
  const double n = norm2(v);
  if (!(n > 0.0)) throw DegenerateInputError("l2_normalize_backward: zero vector");
  double proj = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) proj += grad_unit[i] * v[i] / n;
  Vec g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = (grad_unit[i] - proj * v[i] / n) / n;
  return g;
}

// ---------------------------------------------------------------------------

ProbVector::ProbVector(Vec entries) : entries_(std::move(entries)) {
  if (!is_valid(entries_)) throw InvariantError("ProbVector: entries are not a distribution");
}

bool ProbVector::is_valid(std::span<const double> v, double tol) {
  if (v.empty()) return false;
  double s = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

ProbVector ProbVector::uniform(std::size_t n) {
  if (n == 0) throw ConfigError("uniform distribution over zero outcomes");
  return ProbVector(Vec(n, 1.0 / static_cast<double>(n)));
}

ProbVector ProbVector::onehot(std::size_t n, std::size_t k) {
  if (k >= n) throw RangeError("onehot index out of range");
  Vec v(n, 0.0);
  v[k] = 1.0;
  return ProbVector(std::move(v));
}

ProbVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DegenerateInputError("softmax of empty vector");
  if (!all_finite(logits)) throw DegenerateInputError("softmax: non-finite logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (double& x : p) x /= s;
  return ProbVector(std::move(p));
}

double cross_entropy(std::span<const double> target, std::span<const double> pred) {
  if (target.size() != pred.size()) throw ConfigError("cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0.0) continue;
    loss -= target[i] * std::log(std::max(pred[i], kLogClamp));
  }
  return loss;
}

double cross_entropy(const ProbVector& target, const ProbVector& pred) {
  return cross_entropy(target.values(), pred.values());
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("Mlp needs at least one layer");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    if (s.in == 0 || s.out == 0) throw ConfigError("Mlp layer with zero width");
    if (l > 0 && layers_[l - 1].out != s.in) {
      throw ConfigError("Mlp layer dims do not chain at layer " + std::to_string(l));
    }
    offsets_.push_back(offset);
    offset += s.in * s.out + s.out;
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::random(std::span<const std::size_t> dims, Activation hidden, Activation last,
                Rng& rng) {
  if (dims.size() < 2) throw ConfigError("Mlp::random needs at least two widths");
  std::vector<LayerShape> shapes;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    shapes.push_back({dims[l], dims[l + 1], l + 2 == dims.size() ? last : hidden});
  }
  Mlp net(std::move(shapes));
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const auto& s = net.layers_[l];
    const double gain = s.activation == Activation::kRelu ? 6.0 : 3.0;
    const double limit = std::sqrt(gain / static_cast<double>(s.in));
    std::uniform_real_distribution<double> u(-limit, limit);
    const std::size_t off = net.offsets_[l];
    for (std::size_t i = 0; i < s.in * s.out; ++i) net.params_[off + i] = u(rng);
  }
  return net;
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }

std::span<double> Mlp::mutable_params() {
  ++version_;
  return params_;
}

std::span<const double> Mlp::weight(std::size_t l) const {
  return {params_.data() + offsets_[l], layers_[l].in * layers_[l].out};
}

std::span<const double> Mlp::bias(std::size_t l) const {
  return {params_.data() + bias_offset(l), layers_[l].out};
}

Vec forward(const Mlp& net, std::span<const double> x, ForwardCache* cache) {
  if (x.size() != net.input_dim()) {
    throw ConfigError("forward: input length " + std::to_string(x.size()) +
                      " != input_dim " + std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->net = &net;
    cache->version = net.version();
    cache->inputs.resize(net.num_layers());
    cache->pre.resize(net.num_layers());
  }
  Vec h(x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& s = net.layer(l);
    const auto w = net.weight(l);
    const auto b = net.bias(l);
    Vec z(s.out);
    for (std::size_t o = 0; o < s.out; ++o) {
      double acc = b[o];
      const double* wr = w.data() + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) acc += wr[i] * h[i];
      z[o] = acc;
    }
    if (cache) {
      cache->inputs[l] = std::move(h);
      cache->pre[l] = z;
    }
    if (s.activation == Activation::kRelu) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(z);
  }
  return h;
}

Vec backward(const Mlp& net, const ForwardCache& cache, std::span<const double> grad_out,
             std::span<double> grads) {
  if (cache.net != &net || cache.version != net.version() ||
      cache.inputs.size() != net.num_layers()) {
    throw InvariantError("backward: stale or mismatched forward cache");
  }
  if (grad_out.size() != net.output_dim()) throw ConfigError("backward: grad_out length");
  if (grads.size() != net.num_params()) throw ConfigError("backward: gradient buffer size");

  Vec g(grad_out.begin(), grad_out.end());
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const auto& s = net.layer(l);
    if (s.activation == Activation::kRelu) {
      for (std::size_t o = 0; o < s.out; ++o) {
        if (!(cache.pre[l][o] > 0.0)) g[o] = 0.0;
      }
    }
    const Vec& in = cache.inputs[l];
    double* gw = grads.data() + net.weight_offset(l);
    double* gb = grads.data() + net.bias_offset(l);
    const auto w = net.weight(l);
    Vec gin(s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      gb[o] += go;
      double* gwr = gw + o * s.in;
      const double* wr = w.data() + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) {
        gwr[i] += go * in[i];
        gin[i] += go * wr[i];
      }
    }
    g = std::move(gin);
  }
  return g;
}

// ---------------------------------------------------------------------------

OptimizerState::OptimizerState(std::size_t num_params, double momentum_, double base_lr_)
    : momentum(momentum_), base_lr(base_lr_), velocity(num_params, 0.0) {
  if (!(momentum_ >= 0.0 && momentum_ < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(base_lr_ > 0.0)) throw ConfigError("base learning rate must be > 0");
}

void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              double lr) {
  if (params.size() != grads.size() || state.velocity.size() != params.size()) {
    throw ConfigError("sgd_step: parameter, gradient and velocity shapes differ");
  }
  if (!all_finite(grads)) throw DivergenceError("sgd_step: non-finite gradient");
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = state.momentum * state.velocity[i] + grads[i];
    params[i] -= lr * state.velocity[i];
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) throw RangeError("cosine_lr: total_steps must be >= 1");
  if (step > total_steps) throw RangeError("cosine_lr: step past total_steps");
  if (step == total_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

void ema_update(std::span<double> dst, std::span<const double> src, double momentum) {
  if (dst.size() != src.size()) throw ConfigError("ema_update: size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = momentum * dst[i] + (1.0 - momentum) * src[i];
  }
}

}  // namespace ufda::numkit
