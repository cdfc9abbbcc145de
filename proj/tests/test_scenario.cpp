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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ufda/error.hpp"
#include "ufda/scenario.hpp"

using namespace ufda;
using namespace ufda::scenario;
using numkit::Matrix;
using numkit::Rng;

namespace {

std::set<ClassId> as_set(std::span<const ClassId> v) { return {v.begin(), v.end()}; }

std::set<ClassId> intersect(const std::set<ClassId>& a, const std::set<ClassId>& b) {
  std::set<ClassId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

// Label-space algebra checked from the raw per-source sets only.
void check_space(const LabelSpace& s, const UmdaMatrix& m) {
  const std::set<ClassId> target = as_set(s.target);
  std::set<ClassId> union_all, shared_union;
  for (std::size_t k = 0; k < m.num_sources(); ++k) {
    const auto src = as_set(s.sources.source_classes(k));
    const auto shared = intersect(src, target);
    CHECK(shared.size() == static_cast<std::size_t>(m.shared_counts[k]));
    CHECK(src.size() - shared.size() == static_cast<std::size_t>(m.unknown_counts[k]));
    CHECK(shared == as_set(s.source_shared[k]));
    union_all.insert(src.begin(), src.end());
    shared_union.insert(shared.begin(), shared.end());
  }
  CHECK(shared_union.size() == static_cast<std::size_t>(m.target_shared()));
  CHECK(shared_union == as_set(s.shared));
  CHECK(union_all == as_set(s.sources.union_classes()));
  CHECK(s.target_unknown.size() == static_cast<std::size_t>(m.target_unknown()));
  for (ClassId c : s.target_unknown) {
    CHECK(union_all.count(c) == 0);
    CHECK(target.count(c) == 1);
  }
  CHECK(target.size() == s.shared.size() + s.target_unknown.size());
}

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("parse_umda_matrix") {
  const auto a = parse_umda_matrix({{3, 3, 2, 8}, {2, 2, 1, 52}});
  CHECK(a.num_sources() == 3);
  const auto b = parse_umda_matrix({{4, 4, 4, 10}, {2, 2, 2, 50}});
  CHECK(b.num_sources() == 3);
  CHECK(b.target_unknown() == 50);
  CHECK_THROWS_AS(parse_umda_matrix({{1}, {0}}), ConfigError);
  CHECK_THROWS_AS(parse_umda_matrix({{1, 2}, {0}}), ConfigError);
  CHECK_THROWS_AS(parse_umda_matrix({{1, -2}, {0, 1}}), ConfigError);
  CHECK_THROWS_AS(parse_umda_matrix({{1, 2}}), ConfigError);
}

TEST_CASE("build_label_spaces: random policy reproduces the matrix") {
  const auto m = parse_umda_matrix({{4, 4, 4, 10}, {2, 2, 2, 50}});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto s = build_label_spaces(m, OverlapPolicy::kRandom, rng);
    check_space(s, m);
    CHECK(s.sources.num_union() >= 6);
    CHECK(s.sources.num_union() <= 18);
    CHECK(s.target_unknown.size() == 50);
  }
}

TEST_CASE("build_label_spaces: empty intersection") {
  const auto m = parse_umda_matrix({{3, 3, 2, 8}, {2, 2, 1, 52}});
  Rng rng(4);
  const auto s = build_label_spaces(m, OverlapPolicy::kEmptyIntersection, rng);
  check_space(s, m);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      CHECK(intersect(as_set(s.source_shared[a]), as_set(s.source_shared[b])).empty());
    }
  }
}

TEST_CASE("build_label_spaces: nested") {
  const auto m = parse_umda_matrix({{2, 5, 3, 5}, {1, 1, 1, 3}});
  Rng rng(4);
  const auto s = build_label_spaces(m, OverlapPolicy::kNested, rng);
  check_space(s, m);
  const auto a = as_set(s.source_shared[0]);
  const auto b = as_set(s.source_shared[1]);
  const auto c = as_set(s.source_shared[2]);
  CHECK(std::includes(c.begin(), c.end(), a.begin(), a.end()));
  CHECK(std::includes(b.begin(), b.end(), c.begin(), c.end()));
}

TEST_CASE("build_label_spaces: single source") {
  const auto m = parse_umda_matrix({{3, 3}, {2, 1}});
  Rng rng(1);
  const auto s = build_label_spaces(m, OverlapPolicy::kRandom, rng);
  CHECK(as_set(s.sources.union_classes()) == as_set(s.sources.source_classes(0)));
}

TEST_CASE("build_label_spaces: infeasible counts") {
  Rng rng(0);
  CHECK_THROWS_AS(build_label_spaces(parse_umda_matrix({{5, 2, 4}, {0, 0, 1}}),
                                     OverlapPolicy::kRandom, rng),
                  ConfigError);
  CHECK_THROWS_AS(build_label_spaces(parse_umda_matrix({{2, 2, 5}, {0, 0, 1}}),
                                     OverlapPolicy::kRandom, rng),
                  ConfigError);
  CHECK_THROWS_AS(build_label_spaces(parse_umda_matrix({{4, 4, 4, 10}, {2, 2, 2, 5}}),
                                     OverlapPolicy::kEmptyIntersection, rng),
                  ConfigError);
}

TEST_CASE("SourceLabelSets maps local indices through sorted sets") {
  SourceLabelSets s({{7, 2, 5}, {5, 9}});
  CHECK(s.to_global(0, 0) == 2);
  CHECK(s.to_global(0, 2) == 7);
  CHECK(s.to_local(1, 9) == 1u);
  CHECK_FALSE(s.to_local(1, 2).has_value());
  CHECK(s.num_union() == 4);
  CHECK(s.union_class(s.local_to_union(1, 0)) == 5);
  CHECK(s.coverage(*s.union_index(5)) == 2);
  CHECK(s.coverage(*s.union_index(9)) == 1);
  CHECK_THROWS_AS(s.to_global(1, 2), ProtocolError);
}

TEST_CASE("anchors respect the minimum distance") {
  Rng rng(2);
  const Matrix a = make_anchors(30, 16, 4.0, rng);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.rows(); ++j) CHECK(dist(a.row(i), a.row(j)) >= 4.0 - 1e-9);
  }
}

TEST_CASE("domain shift is orthogonal") {
  Rng rng(6);
  const auto s = make_domain_shift(8, 1.0, 1.0, 1.0, rng);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < 8; ++k) d += s.rotation(k, i) * s.rotation(k, j);
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("generate_domain: no shift and no noise puts samples on anchors") {
  Rng rng(9);
  const Matrix anchors = make_anchors(4, 5, 4.0, rng);
  const auto shift = make_domain_shift(5, 0.0, 1.0, 1.0, rng);
  const std::vector<ClassId> classes{1, 3};
  const auto d = generate_domain(classes, anchors, shift, 0, 7, 0.0, rng);
  CHECK(d.size() == 14);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto a = anchors.row(static_cast<std::size_t>(d.labels[i]));
    for (std::size_t k = 0; k < 5; ++k) CHECK(d.features(i, k) == doctest::Approx(a[k]).epsilon(1e-12));
  }
}

TEST_CASE("generate_domain: two unshifted domains share class means") {
  Rng rng(10);
  const Matrix anchors = make_anchors(3, 4, 4.0, rng);
  const std::vector<ClassId> classes{0, 1, 2};
  const auto s0 = make_domain_shift(4, 0.0, 1.0, 1.0, rng);
  const auto s1 = make_domain_shift(4, 0.0, 1.0, 1.0, rng);
  const auto a = generate_domain(classes, anchors, s0, 0, 4000, 0.3, rng);
  const auto b = generate_domain(classes, anchors, s1, 1, 4000, 0.3, rng);
  for (ClassId c : classes) {
    std::vector<double> ma(4, 0.0), mb(4, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.labels[i] != c) continue;
      for (std::size_t k = 0; k < 4; ++k) ma[k] += a.features(i, k) / 4000.0;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b.labels[i] != c) continue;
      for (std::size_t k = 0; k < 4; ++k) mb[k] += b.features(i, k) / 4000.0;
    }
    CHECK(dist(ma, mb) < 0.05);
  }
}

TEST_CASE("default scenario: a linear classifier separates one domain") {
  ScenarioConfig cfg;
  const auto sc = generate_scenario(cfg, 3);
  const auto& d = sc.sources[0];
  const auto classes = sc.space.sources.source_classes(0);
  const std::size_t k = classes.size();
  std::vector<std::size_t> y(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    y[i] = static_cast<std::size_t>(std::find(classes.begin(), classes.end(), d.labels[i]) -
                                    classes.begin());
  }
  // Even indices train, odd indices test.
  Matrix w(k, d.dim() + 1);
  for (int epoch = 0; epoch < 200; ++epoch) {
    for (std::size_t i = 0; i < d.size(); i += 2) {
      std::vector<double> z(k);
      double mx = -1e300;
      for (std::size_t c = 0; c < k; ++c) {
        z[c] = w(c, d.dim());
        for (std::size_t j = 0; j < d.dim(); ++j) z[c] += w(c, j) * d.features(i, j);
        mx = std::max(mx, z[c]);
      }
      double s = 0.0;
      for (double& v : z) s += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < k; ++c) {
        const double g = z[c] / s - (c == y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d.dim(); ++j) w(c, j) -= 0.01 * g * d.features(i, j);
        w(c, d.dim()) -= 0.01 * g;
      }
    }
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 1; i < d.size(); i += 2) {
    std::size_t best = 0;
    double bz = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double z = w(c, d.dim());
      for (std::size_t j = 0; j < d.dim(); ++j) z += w(c, j) * d.features(i, j);
      if (z > bz) bz = z, best = c;
    }
    correct += best == y[i];
    ++total;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("generate_scenario is a pure function of config and seed") {
  ScenarioConfig cfg;
  cfg.n_per_class = 10;
  const auto a = generate_scenario(cfg, 42);
  const auto b = generate_scenario(cfg, 42);
  const auto c = generate_scenario(cfg, 43);
  CHECK(a.target == b.target);
  for (std::size_t m = 0; m < a.sources.size(); ++m) CHECK(a.sources[m] == b.sources[m]);
  CHECK_FALSE(a.target == c.target);
  CHECK(a.target.size() == 10 * (10 + 5));
  for (std::size_t m = 0; m < a.sources.size(); ++m) CHECK(a.sources[m].size() == 10 * 6);
}

TEST_CASE("dataset round trip is exact") {
  ScenarioConfig cfg;
  cfg.n_per_class = 3;
  const auto sc = generate_scenario(cfg, 1);
  std::stringstream ss;
  write_dataset(ss, sc.target, sc.space.target);
  std::vector<ClassId> set;
  const auto back = read_dataset(ss, &set);
  CHECK(back == sc.target);
  CHECK(set == sc.space.target);
}

TEST_CASE("read_dataset rejects malformed input") {
  std::stringstream bad("ufda-dataset 2\n");
  CHECK_THROWS_AS(read_dataset(bad), ProtocolError);
  std::stringstream short_row(
      "ufda-dataset 1\ndomain 0 samples 1 dim 2\nlabel_set 1 4\n4 1.0\n");
  CHECK_THROWS_AS(read_dataset(short_row), ProtocolError);
  std::stringstream foreign(
      "ufda-dataset 1\ndomain 0 samples 1 dim 1\nlabel_set 1 4\n5 1.0\n");
  CHECK_THROWS_AS(read_dataset(foreign), ProtocolError);
}

}  // TEST_SUITE
