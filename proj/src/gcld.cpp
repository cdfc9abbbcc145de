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

#include "ufda/gcld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ufda/error.hpp"

namespace ufda::gcld {

Vec augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng) {
  Vec out(x.begin(), x.end());
  if (cfg.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    for (double& v : out) v += noise(rng);
  }
  if (cfg.drop_prob > 0.0) {
    std::bernoulli_distribution drop(std::min(cfg.drop_prob, 1.0));
    for (double& v : out) {
      if (drop(rng)) v = 0.0;
    }
  }
  return out;
}

double self_entropy(std::span<const double> row) { return numkit::entropy(row); }

// ---------------------------------------------------------------------------
// GMM

namespace {

double log_normal(double x, const GmmComponent& c) {
  const double d = x - c.mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * c.variance) + d * d / c.variance);
}

}  // namespace

GmmFit fit_gmm2(std::span<const double> values, const GmmOptions& options) {
  const std::size_t n = values.size();
  if (n < 4) throw ConfigError("fit_gmm2 needs at least 4 values");
  if (!numkit::all_finite(values)) throw ConfigError("fit_gmm2: non-finite value");

  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());

  GmmFit fit;
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(mean))) {
    fit.degenerate = true;
    const double floor = 1e-12;
    fit.components[0] = {0.5, mean, floor};
    fit.components[1] = {0.5, mean, floor};
    fit.posterior_low.assign(n, 0.5);
    return fit;
  }

  const double var_floor = std::max(1e-12, 1e-6 * var);
  // Initialize from the lower and upper halves of the sorted sample.
  Vec sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t half = n / 2;
  auto moments = [&](std::size_t b, std::size_t e) {
    double m = 0.0;
    for (std::size_t i = b; i < e; ++i) m += sorted[i];
    m /= static_cast<double>(e - b);
    double v = 0.0;
    for (std::size_t i = b; i < e; ++i) v += (sorted[i] - m) * (sorted[i] - m);
    v /= static_cast<double>(e - b);
    return GmmComponent{0.5, m, std::max(v, var_floor)};
  };
  auto comp = std::array<GmmComponent, 2>{moments(0, half), moments(half, n)};

  Vec resp(n), prev_resp;
  auto prev_comp = comp;
  double prev_ll = -INFINITY;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a0 = std::log(comp[0].weight) + log_normal(values[i], comp[0]);
      const double a1 = std::log(comp[1].weight) + log_normal(values[i], comp[1]);
      const double mx = std::max(a0, a1);
      const double lse = mx + std::log(std::exp(a0 - mx) + std::exp(a1 - mx));
      ll += lse;
      resp[i] = std::exp(a0 - lse);
    }
    // At the fixed point round-off can lower ll by a few ulps; keep the
    // previous step instead.
    if (ll < prev_ll) {
      comp = prev_comp;
      resp = std::move(prev_resp);
      break;
    }
    fit.log_likelihood.push_back(ll);
    fit.iterations = it + 1;
    if (it > 0 && ll - prev_ll < options.tolerance) break;
    prev_ll = ll;
    prev_comp = comp;
    prev_resp = resp;

    double n0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n0 += resp[i];
      s0 += resp[i] * values[i];
      s1 += (1.0 - resp[i]) * values[i];
    }
    const double n1 = static_cast<double>(n) - n0;
    if (n0 < 1e-12 || n1 < 1e-12) break;  // one component absorbed everything
    const double m0 = s0 / n0;
    const double m1 = s1 / n1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += resp[i] * (values[i] - m0) * (values[i] - m0);
      v1 += (1.0 - resp[i]) * (values[i] - m1) * (values[i] - m1);
    }
    comp[0] = {n0 / static_cast<double>(n), m0, std::max(v0 / n0, var_floor)};
    comp[1] = {n1 / static_cast<double>(n), m1, std::max(v1 / n1, var_floor)};
  }

  if (comp[0].mean > comp[1].mean) {
    std::swap(comp[0], comp[1]);
    for (double& r : resp) r = 1.0 - r;
  }
  fit.components = comp;
  fit.posterior_low = std::move(resp);
  return fit;
}

std::vector<Division> divide_samples(const GmmFit& fit, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must be in [0,1]");
  std::vector<Division> out;
  out.reserve(fit.posterior_low.size());
  for (double w : fit.posterior_low) {
    out.push_back(w >= sigma ? Division::kShared : Division::kUnknown);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prototypes / bank / queue

PrototypeSet::PrototypeSet(Matrix prototypes, double gamma) : mu_(std::move(prototypes)), gamma_(gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  for (std::size_t c = 0; c < mu_.rows(); ++c) {
    const Vec u = numkit::l2_normalize(mu_.row(c));
    std::copy(u.begin(), u.end(), mu_.row(c).begin());
  }
}

PrototypeSet PrototypeSet::random(std::size_t num_classes, std::size_t dim, double gamma,
                                  Rng& rng) {
  Matrix m(num_classes, dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : m.data()) v = normal(rng);
  return PrototypeSet(std::move(m), gamma);
}

void PrototypeSet::pull(std::size_t c, std::span<const double> q) {
  if (c >= mu_.rows()) throw RangeError("prototype index out of range");
  if (q.size() != mu_.cols()) throw ConfigError("prototype dimension mismatch");
  auto row = mu_.row(c);
  Vec mixed(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) mixed[k] = gamma_ * row[k] + (1.0 - gamma_) * q[k];
  const Vec u = numkit::l2_normalize(mixed);
  std::copy(u.begin(), u.end(), row.begin());
}

void update_prototypes(PrototypeSet& protos, std::span<const double> q,
                       const numkit::ProbVector& f_out) {
  if (f_out.size() != protos.num_classes()) {
    throw ConfigError("classifier output width differs from prototype count");
  }
  protos.pull(numkit::argmax(f_out.values()), q);
}

MemoryBank::MemoryBank(Matrix rows, double delta) : rows_(std::move(rows)), delta_(delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must be in [0,1]");
}

MemoryBank MemoryBank::random(std::size_t num_samples, std::size_t num_classes, double delta,
                              Rng& rng) {
  Matrix m(num_samples, num_classes);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < num_samples; ++i) {
    Vec v(num_classes);
    for (double& x : v) x = normal(rng);
    const Vec u = numkit::l2_normalize(v);
    std::copy(u.begin(), u.end(), m.row(i).begin());
  }
  return MemoryBank(std::move(m), delta);
}

void MemoryBank::mix(std::size_t i, std::span<const double> candidate) {
  if (i >= rows_.rows()) throw RangeError("memory bank row out of range");
  if (candidate.size() != rows_.cols()) throw ConfigError("memory bank row width mismatch");
  auto row = rows_.row(i);
  for (std::size_t c = 0; c < row.size(); ++c) {
    row[c] = delta_ * candidate[c] + (1.0 - delta_) * row[c];
  }
}

Matrix MemoryBank::normalized() const {
  Matrix out(rows_.rows(), rows_.cols());
  for (std::size_t i = 0; i < rows_.rows(); ++i) {
    const auto p = numkit::softmax(rows_.row(i));
    std::copy(p.values().begin(), p.values().end(), out.row(i).begin());
  }
  return out;
}

Vec MemoryBank::entropies() const {
  Vec h(rows_.rows());
  for (std::size_t i = 0; i < rows_.rows(); ++i) {
    h[i] = self_entropy(numkit::softmax(rows_.row(i)).values());
  }
  return h;
}

void bank_row_update(MemoryBank& bank, std::size_t i, std::span<const double> q,
                     const PrototypeSet& protos) {
  if (protos.num_classes() != bank.num_classes()) {
    throw ConfigError("bank width differs from prototype count");
  }
  Vec candidate(protos.num_classes());
  for (std::size_t c = 0; c < candidate.size(); ++c) {
    candidate[c] = numkit::dot(q, protos.prototype(c));
  }
  bank.mix(i, candidate);
}

EmbeddingQueue::EmbeddingQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("queue capacity must be >= 1");
}

void EmbeddingQueue::push(Vec key, std::size_t label) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back({std::move(key), label});
}

// ---------------------------------------------------------------------------
// Contrastive loss

ContrastiveResult contrastive_loss(std::span<const double> q, const ContrastivePool& pool,
                                   std::optional<std::size_t> exclude, std::size_t q_label,
                                   double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature tau must be > 0");
  const std::size_t n = pool.size();
  if (pool.embeddings.rows() != n) throw ConfigError("pool embeddings and labels disagree");
  if (n > 0 && pool.embeddings.cols() != q.size()) throw ConfigError("pool dimension mismatch");
  const std::size_t contrast = n - (exclude && *exclude < n ? 1 : 0);
  if (contrast == 0) throw InvariantError("contrastive loss with an empty contrast set");

  Vec logits(n, 0.0);
  double mx = -INFINITY;
  std::size_t num_pos = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (exclude && *exclude == j) continue;
    logits[j] = numkit::dot(q, pool.embeddings.row(j)) / tau;
    mx = std::max(mx, logits[j]);
    if (pool.labels[j] == q_label) ++num_pos;
  }
  ContrastiveResult res;
  res.grad_q.assign(q.size(), 0.0);
  res.num_positives = num_pos;
  if (num_pos == 0) return res;

  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (exclude && *exclude == j) continue;
    z += std::exp(logits[j] - mx);
  }
  const double lse = mx + std::log(z);
  const double inv_pos = 1.0 / static_cast<double>(num_pos);
  double pos_mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (exclude && *exclude == j) continue;
    const double soft = std::exp(logits[j] - lse);
    const bool positive = pool.labels[j] == q_label;
    if (positive) pos_mean += logits[j] * inv_pos;
    const double coef = (soft - (positive ? inv_pos : 0.0)) / tau;
    const auto e = pool.embeddings.row(j);
    for (std::size_t k = 0; k < q.size(); ++k) res.grad_q[k] += coef * e[k];
  }
  res.loss = lse - pos_mean;
  return res;
}

// ---------------------------------------------------------------------------
// Target model

TargetModel TargetModel::create(const TargetArch& arch, double encoder_momentum, Rng& rng) {
  if (!(encoder_momentum >= 0.0 && encoder_momentum <= 1.0)) {
    throw ConfigError("encoder momentum must be in [0,1]");
  }
  TargetModel m;
  const std::size_t bb[] = {arch.input_dim, arch.hidden_dim, arch.feature_dim};
  const std::size_t cl[] = {arch.feature_dim, arch.num_classes};
  const std::size_t pr[] = {arch.feature_dim, arch.feature_dim, arch.embed_dim};
  using numkit::Activation;
  m.backbone = numkit::Mlp::random(bb, Activation::kRelu, Activation::kRelu, rng);
  m.classifier = numkit::Mlp::random(cl, Activation::kNone, Activation::kNone, rng);
  m.projection = numkit::Mlp::random(pr, Activation::kRelu, Activation::kNone, rng);
  m.key_backbone = m.backbone;
  m.key_projection = m.projection;
  m.encoder_momentum = encoder_momentum;
  return m;
}

Vec TargetModel::logits(std::span<const double> x) const {
  return numkit::forward(classifier, numkit::forward(backbone, x));
}

Vec TargetModel::query_embedding(std::span<const double> x) const {
  return numkit::l2_normalize(numkit::forward(projection, numkit::forward(backbone, x)));
}

Vec TargetModel::key_embedding(std::span<const double> x) const {
  return numkit::l2_normalize(numkit::forward(key_projection, numkit::forward(key_backbone, x)));
}

void TargetModel::momentum_update() {
  numkit::ema_update(key_backbone.mutable_params(), backbone.params(), encoder_momentum);
  numkit::ema_update(key_projection.mutable_params(), projection.params(), encoder_momentum);
}

TargetGradients::TargetGradients(const TargetModel& model)
    : backbone(model.backbone.num_params()),
      classifier(model.classifier.num_params()),
      projection(model.projection.num_params()) {}

void TargetGradients::zero() {
  std::fill(backbone.begin(), backbone.end(), 0.0);
  std::fill(classifier.begin(), classifier.end(), 0.0);
  std::fill(projection.begin(), projection.end(), 0.0);
}

SampleLoss sample_objective(const TargetModel& model, std::span<const double> x,
                            std::span<const double> target, const ContrastivePool* pool,
                            std::optional<std::size_t> exclude, std::size_t label, double tau,
                            double beta, double scale, TargetGradients* grads) {
  if (target.size() != model.num_classes()) throw ConfigError("pseudo-label width mismatch");
  numkit::ForwardCache bb_cache, cl_cache, pr_cache;
  const Vec feat = numkit::forward(model.backbone, x, grads ? &bb_cache : nullptr);
  const Vec z = numkit::forward(model.classifier, feat, grads ? &cl_cache : nullptr);
  const auto p = numkit::softmax(z);

  SampleLoss loss;
  loss.cls = numkit::cross_entropy(target, p.values());

  Vec dfeat(feat.size(), 0.0);
  if (pool) {
    const Vec raw = numkit::forward(model.projection, feat, grads ? &pr_cache : nullptr);
    const Vec q = numkit::l2_normalize(raw);
    const auto res = contrastive_loss(q, *pool, exclude, label, tau);
    loss.cont = res.loss;
    if (grads && beta != 0.0 && res.num_positives > 0) {
      Vec dq = res.grad_q;
      for (double& v : dq) v *= beta * scale;
      const Vec draw = numkit::l2_normalize_backward(raw, dq);
      dfeat = numkit::backward(model.projection, pr_cache, draw, grads->projection);
    }
  }
  if (grads) {
    double mass = 0.0;
    for (double t : target) mass += t;
    Vec dz(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) dz[c] = scale * (p[c] * mass - target[c]);
    const Vec dfeat_cls = numkit::backward(model.classifier, cl_cache, dz, grads->classifier);
    for (std::size_t k = 0; k < dfeat.size(); ++k) dfeat[k] += dfeat_cls[k];
    numkit::backward(model.backbone, bb_cache, dfeat, grads->backbone);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training loop

TrainingState TrainingState::create(const TargetArch& arch, numkit::Matrix initial_labels,
                                    const GcldHyper& hyper, std::size_t total_steps, Rng& rng) {
  if (initial_labels.cols() != arch.num_classes) {
    throw ConfigError("initial pseudo-labels do not match the class count");
  }
  if (total_steps == 0) throw ConfigError("total_steps must be >= 1");
  TrainingState s{
      .model = TargetModel::create(arch, hyper.encoder_momentum, rng),
      .opt_backbone = {},
      .opt_classifier = {},
      .opt_projection = {},
      .labels = {},
      .bank = {},
      .protos = {},
      .queue = EmbeddingQueue(hyper.queue_capacity),
      .step = 0,
      .total_steps = total_steps,
  };
  s.opt_backbone = numkit::OptimizerState(s.model.backbone.num_params(), hyper.momentum, hyper.lr);
  s.opt_classifier =
      numkit::OptimizerState(s.model.classifier.num_params(), hyper.momentum, hyper.lr);
  s.opt_projection =
      numkit::OptimizerState(s.model.projection.num_params(), hyper.momentum, hyper.lr);
  const std::size_t n = initial_labels.rows();
  s.labels = pseudo_label::PseudoLabelState::init(std::move(initial_labels));
  s.bank = MemoryBank::random(n, arch.num_classes, hyper.delta, rng);
  s.protos = PrototypeSet::random(arch.num_classes, arch.embed_dim, hyper.gamma, rng);
  return s;
}

std::size_t batches_per_epoch(std::size_t num_samples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  return (num_samples + batch_size - 1) / batch_size;
}

EpochStats train_epoch(TrainingState& state, const Matrix& features, const GcldHyper& hyper,
                       Rng& rng, const BatchHook& hook) {
  const std::size_t n = features.rows();
  if (n != state.labels.num_samples()) {
    throw ConfigError("train_epoch: feature rows differ from pseudo-label rows");
  }
  if (hyper.enabled && n != state.bank.num_samples()) {
    throw ConfigError("train_epoch: memory bank size differs from sample count");
  }
  auto& model = state.model;
  const std::size_t embed_dim = model.projection.output_dim();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats stats;
  TargetGradients grads(model);
  const std::size_t nb = batches_per_epoch(n, hyper.batch_size);

  for (std::size_t b = 0; b < nb; ++b) {
    if (hook) hook(b, state.labels);
    const std::size_t begin = b * hyper.batch_size;
    const std::size_t count = std::min(hyper.batch_size, n - begin);
    const std::span<const std::size_t> idx(order.data() + begin, count);

    std::vector<Vec> xq(count);
    std::vector<numkit::ProbVector> probs;
    std::vector<std::size_t> pred(count);
    probs.reserve(count);
    ContrastivePool pool;
    if (hyper.enabled) {
      pool.embeddings = Matrix(2 * count + state.queue.size(), embed_dim);
      pool.labels.resize(pool.embeddings.rows());
    }
    for (std::size_t j = 0; j < count; ++j) {
      const auto x = features.row(idx[j]);
      xq[j] = augment(x, hyper.augment, rng);
      const Vec feat = numkit::forward(model.backbone, xq[j]);
      probs.push_back(numkit::softmax(numkit::forward(model.classifier, feat)));
      pred[j] = numkit::argmax(probs.back().values());
      if (hyper.enabled) {
        const Vec xk = augment(x, hyper.augment, rng);
        const Vec q = numkit::l2_normalize(numkit::forward(model.projection, feat));
        const Vec k = model.key_embedding(xk);
        std::copy(q.begin(), q.end(), pool.embeddings.row(j).begin());
        std::copy(k.begin(), k.end(), pool.embeddings.row(count + j).begin());
        pool.labels[j] = pool.labels[count + j] = pred[j];
      }
    }
    if (hyper.enabled) {
      std::size_t r = 2 * count;
      for (const auto& e : state.queue.entries()) {
        std::copy(e.key.begin(), e.key.end(), pool.embeddings.row(r).begin());
        pool.labels[r++] = e.label;
      }
    }

    grads.zero();
    const double scale = 1.0 / static_cast<double>(count);
    for (std::size_t j = 0; j < count; ++j) {
      const auto loss = sample_objective(model, xq[j], state.labels.current.row(idx[j]),
                                         hyper.enabled ? &pool : nullptr, j, pred[j], hyper.tau,
                                         hyper.enabled ? hyper.beta : 0.0, scale, &grads);
      stats.loss_cls += loss.cls;
      stats.loss_cont += loss.cont;
    }

    const double lr = numkit::cosine_lr(std::min(state.step, state.total_steps),
                                        state.total_steps, hyper.lr);
    numkit::sgd_step(model.backbone.mutable_params(), grads.backbone, state.opt_backbone, lr);
    numkit::sgd_step(model.classifier.mutable_params(), grads.classifier, state.opt_classifier,
                     lr);
    if (hyper.enabled) {
      numkit::sgd_step(model.projection.mutable_params(), grads.projection,
                       state.opt_projection, lr);
    }
    ++state.step;

    if (hyper.enabled) {
      model.momentum_update();
      for (std::size_t j = 0; j < count; ++j) {
        const auto q = pool.embeddings.row(j);
        update_prototypes(state.protos, q, probs[j]);
        bank_row_update(state.bank, idx[j], q, state.protos);
      }
      for (std::size_t j = 0; j < count; ++j) {
        const auto k = pool.embeddings.row(count + j);
        state.queue.push(Vec(k.begin(), k.end()), pred[j]);
      }
    }
  }
  stats.loss_cls /= static_cast<double>(n);
  stats.loss_cont /= static_cast<double>(n);

  if (hyper.enabled) {
    const Vec h = state.bank.entropies();
    GmmFit fit = fit_gmm2(h);
    const auto division = divide_samples(fit, hyper.sigma);
    pseudo_label::update_pseudo_targets(state.labels, division, state.bank.rows(), hyper.phi);
    stats.num_shared = static_cast<std::size_t>(
        std::count(division.begin(), division.end(), Division::kShared));
    stats.num_unknown = n - stats.num_shared;
    stats.gmm = std::move(fit);
  } else {
    stats.num_shared = n;
  }
  return stats;
}

}  // namespace ufda::gcld
