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

#include "ufda/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ufda/error.hpp"

namespace ufda::scenario {

using numkit::Matrix;
using numkit::Rng;
using numkit::Vec;

UmdaMatrix parse_umda_matrix(const std::vector<std::vector<int>>& rows) {
  if (rows.size() != 2) throw ConfigError("UMDA-Matrix must have exactly 2 rows");
  if (rows[0].size() != rows[1].size()) throw ConfigError("UMDA-Matrix rows are ragged");
  if (rows[0].size() < 2) {
    throw ConfigError("UMDA-Matrix needs at least one source column and the target column");
  }
  for (const auto& row : rows) {
    for (int v : row) {
      if (v < 0) throw ConfigError("UMDA-Matrix counts must be non-negative");
    }
  }
  UmdaMatrix m{rows[0], rows[1]};
  for (std::size_t s = 0; s < m.num_sources(); ++s) {
    if (m.shared_counts[s] + m.unknown_counts[s] == 0) {
      throw ConfigError("source " + std::to_string(s) + " has an empty label set");
    }
  }
  return m;
}

OverlapPolicy parse_overlap_policy(std::string_view name) {
  if (name == "empty" || name == "empty-intersection") return OverlapPolicy::kEmptyIntersection;
  if (name == "nested") return OverlapPolicy::kNested;
  if (name == "random") return OverlapPolicy::kRandom;
  throw ConfigError("unknown overlap policy '" + std::string(name) + "'");
}

std::string to_string(OverlapPolicy policy) {
  switch (policy) {
    case OverlapPolicy::kEmptyIntersection:
      return "empty-intersection";
    case OverlapPolicy::kNested:
      return "nested";
    case OverlapPolicy::kRandom:
      return "random";
  }
  return "random";
}

// ---------------------------------------------------------------------------

SourceLabelSets::SourceLabelSets(std::vector<std::vector<ClassId>> per_source)
    : per_source_(std::move(per_source)) {
  for (auto& s : per_source_) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    union_.insert(union_.end(), s.begin(), s.end());
  }
  std::sort(union_.begin(), union_.end());
  union_.erase(std::unique(union_.begin(), union_.end()), union_.end());
  coverage_.assign(union_.size(), 0);
  for (const auto& s : per_source_) {
    auto& map = local_to_union_.emplace_back();
    for (ClassId c : s) {
      const std::size_t u = *union_index(c);
      map.push_back(u);
      ++coverage_[u];
    }
  }
}

ClassId SourceLabelSets::to_global(std::size_t m, std::size_t local) const {
  if (m >= per_source_.size()) throw ProtocolError("unknown source " + std::to_string(m));
  if (local >= per_source_[m].size()) {
    throw ProtocolError("local class " + std::to_string(local) + " outside label set of source " +
                        std::to_string(m));
  }
  return per_source_[m][local];
}

std::optional<std::size_t> SourceLabelSets::to_local(std::size_t m, ClassId global) const {
  const auto& s = per_source_.at(m);
  auto it = std::lower_bound(s.begin(), s.end(), global);
  if (it == s.end() || *it != global) return std::nullopt;
  return static_cast<std::size_t>(it - s.begin());
}

bool SourceLabelSets::source_has(std::size_t m, ClassId global) const {
  return to_local(m, global).has_value();
}

std::optional<std::size_t> SourceLabelSets::union_index(ClassId global) const {
  auto it = std::lower_bound(union_.begin(), union_.end(), global);
  if (it == union_.end() || *it != global) return std::nullopt;
  return static_cast<std::size_t>(it - union_.begin());
}

std::size_t SourceLabelSets::local_to_union(std::size_t m, std::size_t local) const {
  if (m >= local_to_union_.size() || local >= local_to_union_[m].size()) {
    throw ProtocolError("local class outside source label set");
  }
  return local_to_union_[m][local];
}

bool LabelSpace::is_target_unknown(ClassId c) const {
  return std::binary_search(target_unknown.begin(), target_unknown.end(), c);
}

bool LabelSpace::is_shared(ClassId c) const {
  return std::binary_search(shared.begin(), shared.end(), c);
}

namespace {

std::vector<std::vector<ClassId>> assign_shared(const UmdaMatrix& matrix, OverlapPolicy policy,
                                                Rng& rng) {
  const std::size_t num_sources = matrix.num_sources();
  const int total = matrix.target_shared();
  std::vector<int> want(matrix.shared_counts.begin(), matrix.shared_counts.end() - 1);
  const int largest = *std::max_element(want.begin(), want.end());
  const int sum = std::accumulate(want.begin(), want.end(), 0);
  if (total < largest) {
    throw ConfigError("infeasible UMDA-Matrix: |C| = " + std::to_string(total) +
                      " is smaller than a source shared count " + std::to_string(largest));
  }

  std::vector<ClassId> pool(static_cast<std::size_t>(total));
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<std::vector<ClassId>> sets(num_sources);
  switch (policy) {
    case OverlapPolicy::kEmptyIntersection: {
      if (sum != total) {
        throw ConfigError("empty-intersection policy needs sum |C_m| == |C| (" +
                          std::to_string(sum) + " vs " + std::to_string(total) + ")");
      }
      std::size_t next = 0;
      for (std::size_t m = 0; m < num_sources; ++m) {
        for (int k = 0; k < want[m]; ++k) sets[m].push_back(pool[next++]);
      }
      break;
    }
    case OverlapPolicy::kNested: {
      if (largest != total) {
        throw ConfigError("nested policy needs max |C_m| == |C|");
      }
      for (std::size_t m = 0; m < num_sources; ++m) {
        sets[m].assign(pool.begin(), pool.begin() + want[m]);
      }
      break;
    }
    case OverlapPolicy::kRandom: {
      if (sum < total) {
        throw ConfigError("infeasible UMDA-Matrix: source shared sets cannot cover |C| = " +
                          std::to_string(total));
      }
      // Every class of C goes to one source with spare capacity, then each
      // source is topped up with classes it does not hold yet.
      std::vector<int> room = want;
      for (ClassId c : pool) {
        std::vector<std::size_t> open;
        for (std::size_t m = 0; m < num_sources; ++m) {
          if (room[m] > 0) open.push_back(m);
        }
        std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
        const std::size_t m = open[pick(rng)];
        sets[m].push_back(c);
        --room[m];
      }
      for (std::size_t m = 0; m < num_sources; ++m) {
        std::vector<ClassId> rest;
        for (ClassId c : pool) {
          if (std::find(sets[m].begin(), sets[m].end(), c) == sets[m].end()) rest.push_back(c);
        }
        std::shuffle(rest.begin(), rest.end(), rng);
        for (int k = 0; k < room[m]; ++k) sets[m].push_back(rest[static_cast<std::size_t>(k)]);
      }
      break;
    }
  }
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

}  // namespace

LabelSpace build_label_spaces(const UmdaMatrix& matrix, OverlapPolicy policy, Rng& rng) {
  if (matrix.shared_counts.size() < 2 ||
      matrix.shared_counts.size() != matrix.unknown_counts.size()) {
    throw ConfigError("malformed UMDA-Matrix");
  }
  LabelSpace space;
  const std::size_t num_sources = matrix.num_sources();
  space.source_shared = assign_shared(matrix, policy, rng);

  ClassId next = matrix.target_shared();
  space.shared.resize(static_cast<std::size_t>(matrix.target_shared()));
  std::iota(space.shared.begin(), space.shared.end(), 0);

  std::vector<std::vector<ClassId>> full(num_sources);
  space.source_private.resize(num_sources);
  for (std::size_t m = 0; m < num_sources; ++m) {
    for (int k = 0; k < matrix.unknown_counts[m]; ++k) space.source_private[m].push_back(next++);
    full[m] = space.source_shared[m];
    full[m].insert(full[m].end(), space.source_private[m].begin(), space.source_private[m].end());
  }
  for (int k = 0; k < matrix.target_unknown(); ++k) space.target_unknown.push_back(next++);
  space.num_global_classes = static_cast<std::size_t>(next);

  space.target = space.shared;
  space.target.insert(space.target.end(), space.target_unknown.begin(),
                      space.target_unknown.end());
  space.sources = SourceLabelSets(std::move(full));
  return space;
}

// ---------------------------------------------------------------------------

Matrix make_anchors(std::size_t num_classes, std::size_t dim, double min_distance, Rng& rng) {
  if (dim < 2) throw ConfigError("feature dimension must be >= 2");
  Matrix a(num_classes, dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : a.data()) v = normal(rng);
  if (num_classes < 2) return a;
  double closest = INFINITY;
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t j = i + 1; j < num_classes; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = a(i, k) - a(j, k);
        d2 += diff * diff;
      }
      closest = std::min(closest, std::sqrt(d2));
    }
  }
  const double scale = min_distance / closest;
  for (double& v : a.data()) v *= scale;
  return a;
}

Matrix matrix_exp(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ConfigError("matrix_exp needs a square matrix");
  auto multiply = [n](const Matrix& x, const Matrix& y) {
    Matrix z(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double xik = x(i, k);
        for (std::size_t j = 0; j < n; ++j) z(i, j) += xik * y(k, j);
      }
    return z;
  };
  double norm = 0.0;
  for (double v : a.data()) norm = std::max(norm, std::abs(v));
  norm *= static_cast<double>(n);
  int squarings = 0;
  while (norm > 0.25) {
    norm /= 2.0;
    ++squarings;
  }
  Matrix scaled = a;
  for (double& v : scaled.data()) v = std::ldexp(v, -squarings);

  Matrix result(n, n);
  Matrix term(n, n);
  for (std::size_t i = 0; i < n; ++i) result(i, i) = term(i, i) = 1.0;
  for (int k = 1; k <= 18; ++k) {
    term = multiply(term, scaled);
    for (double& v : term.data()) v /= static_cast<double>(k);
    for (std::size_t i = 0; i < n * n; ++i) result.data()[i] += term.data()[i];
  }
  for (int s = 0; s < squarings; ++s) result = multiply(result, result);
  return result;
}

Vec DomainShift::apply(std::span<const double> x) const {
  const std::size_t d = translation.size();
  Vec y(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = translation[i];
    for (std::size_t j = 0; j < d; ++j) acc += rotation(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

DomainShift make_domain_shift(std::size_t dim, double shift_strength, double rotation_scale,
                              double translation_scale, Rng& rng) {
  if (dim < 2) throw ConfigError("feature dimension must be >= 2");
  if (!(shift_strength >= 0.0 && shift_strength <= 1.0)) {
    throw ConfigError("shift_strength must be in [0,1]");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix skew(dim, dim);
  const double scale = rotation_scale * shift_strength / std::sqrt(2.0 * static_cast<double>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      const double v = normal(rng) * scale;
      skew(i, j) = v;
      skew(j, i) = -v;
    }
  }
  DomainShift shift;
  shift.rotation = matrix_exp(skew);
  shift.translation.resize(dim);
  const double tscale = translation_scale * shift_strength / std::sqrt(static_cast<double>(dim));
  for (double& t : shift.translation) t = normal(rng) * tscale;
  return shift;
}

DomainDataset generate_domain(std::span<const ClassId> classes, const Matrix& anchors,
                              const DomainShift& shift, std::size_t domain,
                              std::size_t n_per_class, double noise_std, Rng& rng) {
  const std::size_t d = anchors.cols();
  if (d < 2) throw ConfigError("feature dimension must be >= 2");
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  if (classes.empty()) throw ConfigError("domain without classes");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (shift.translation.size() != d) throw ConfigError("domain shift dimension mismatch");

  DomainDataset data;
  data.domain = domain;
  data.features = Matrix(classes.size() * n_per_class, d);
  data.labels.reserve(classes.size() * n_per_class);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t row = 0;
  for (ClassId c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= anchors.rows()) {
      throw ConfigError("class id without an anchor");
    }
    const Vec center = shift.apply(anchors.row(static_cast<std::size_t>(c)));
    for (std::size_t n = 0; n < n_per_class; ++n, ++row) {
      auto r = data.features.row(row);
      for (std::size_t k = 0; k < d; ++k) {
        r[k] = center[k] + (noise_std > 0.0 ? noise_std * normal(rng) : 0.0);
      }
      data.labels.push_back(c);
    }
  }
  return data;
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

namespace {
// Stream ids for generate_scenario.
constexpr std::uint64_t kLabelStream = 1;
constexpr std::uint64_t kAnchorStream = 2;
constexpr std::uint64_t kShiftStream = 100;
constexpr std::uint64_t kSampleStream = 200;
}  // namespace

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  Scenario sc;
  sc.config = config;
  auto label_rng = derive_rng(seed, kLabelStream);
  sc.space = build_label_spaces(config.matrix, config.overlap, label_rng);
  auto anchor_rng = derive_rng(seed, kAnchorStream);
  sc.anchors = make_anchors(sc.space.num_global_classes, config.dim, config.anchor_min_distance,
                            anchor_rng);
  const std::size_t num_sources = config.matrix.num_sources();
  for (std::size_t dom = 0; dom <= num_sources; ++dom) {
    auto rng = derive_rng(seed, kShiftStream + dom);
    sc.shifts.push_back(make_domain_shift(config.dim, config.shift_strength,
                                          config.rotation_scale, config.translation_scale, rng));
  }
  for (std::size_t m = 0; m < num_sources; ++m) {
    auto rng = derive_rng(seed, kSampleStream + m);
    sc.sources.push_back(generate_domain(sc.space.sources.source_classes(m), sc.anchors,
                                         sc.shifts[m], m, config.n_per_class, config.noise_std,
                                         rng));
  }
  auto rng = derive_rng(seed, kSampleStream + num_sources);
  sc.target = generate_domain(sc.space.target, sc.anchors, sc.shifts[num_sources], num_sources,
                              config.n_per_class, config.noise_std, rng);
  return sc;
}

// ---------------------------------------------------------------------------

void write_dataset(std::ostream& out, const DomainDataset& data,
                   std::span<const ClassId> label_set) {
  out << "ufda-dataset 1\n";
  out << "domain " << data.domain << " samples " << data.size() << " dim " << data.dim() << "\n";
  out << "label_set " << label_set.size();
  for (ClassId c : label_set) out << ' ' << c;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

DomainDataset read_dataset(std::istream& in, std::vector<ClassId>* label_set) {
  auto fail = [](const std::string& what) -> ProtocolError {
    return ProtocolError("read_dataset: " + what);
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "ufda-dataset" || version != 1) {
    throw fail("bad header");
  }
  std::string k1, k2, k3;
  std::size_t domain = 0, n = 0, d = 0;
  if (!(in >> k1 >> domain >> k2 >> n >> k3 >> d) || k1 != "domain" || k2 != "samples" ||
      k3 != "dim") {
    throw fail("bad shape record");
  }
  std::string k4;
  std::size_t k = 0;
  if (!(in >> k4 >> k) || k4 != "label_set") throw fail("bad label_set record");
  std::vector<ClassId> labels_allowed(k);
  for (auto& c : labels_allowed) {
    if (!(in >> c)) throw fail("truncated label_set");
  }
  DomainDataset data;
  data.domain = domain;
  data.features = Matrix(n, d);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> data.labels[i])) throw fail("truncated sample record");
    for (std::size_t j = 0; j < d; ++j) {
      if (!(in >> data.features(i, j))) throw fail("truncated sample record");
    }
    if (!labels_allowed.empty() &&
        std::find(labels_allowed.begin(), labels_allowed.end(), data.labels[i]) ==
            labels_allowed.end()) {
      throw fail("label outside the declared label set");
    }
  }
  if (label_set) *label_set = std::move(labels_allowed);
  return data;
}

}  // namespace ufda::scenario
