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

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "ufda/error.hpp"
#include "ufda/pseudo_label.hpp"

using namespace ufda;
using namespace ufda::pseudo_label;
using numkit::Matrix;
using numkit::Rng;
using numkit::Vec;
using scenario::SourceLabelSets;

namespace {

Vec row_of(const Matrix& m, std::size_t i) { return {m.row(i).begin(), m.row(i).end()}; }

}  // namespace

TEST_SUITE("pseudo_label") {

TEST_CASE("PHL: unanimous vote is one-hot") {
  SourceLabelSets s({{0, 2}, {1, 2}, {2, 3}});
  // Local index of class 2: 1 in source 0, 1 in source 1, 0 in source 2.
  const auto rows = generate_phl({{1}, {1}, {0}}, s);
  CHECK(row_of(rows, 0) == Vec{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("PHL: even split") {
  SourceLabelSets s({{1, 2}, {3, 4}});
  const auto rows = generate_phl({{0}, {1}}, s);
  CHECK(row_of(rows, 0) == Vec{0.5, 0.0, 0.0, 0.5});
}

TEST_CASE("PHL: matches the counting oracle") {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const auto f = oracle::random_vote_fixture(rng, 30, 4, 8);
    const auto a = generate_phl(f.votes, f.space);
    const auto b = oracle::phl_by_counting(f);
    REQUIRE(a.rows() == b.rows());
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-15));
    }
  }
}

TEST_CASE("PHL: shape errors") {
  SourceLabelSets s({{1, 2}, {3}});
  CHECK_THROWS_AS(generate_phl({{0}}, s), ProtocolError);
  CHECK_THROWS_AS(generate_phl({{0, 1}, {0}}, s), ProtocolError);
}

TEST_CASE("PSL: identical sources reproduce their output") {
  SourceLabelSets s({{0, 1, 2}, {0, 1, 2}});
  const Vec p{0.2, 0.5, 0.3};
  const auto rows = generate_psl({{p}, {p}}, s);
  for (std::size_t c = 0; c < 3; ++c) CHECK(rows(0, c) == doctest::Approx(p[c]).epsilon(1e-15));
}

TEST_CASE("PSL: coverage divisors on a hand-worked example") {
  // Union {0, 1}. Class 0 is covered by all three sources, class 1 by one.
  SourceLabelSets s({{0}, {0}, {0, 1}});
  const auto rows = generate_psl({{{1.0}}, {{1.0}}, {{0.4, 0.6}}}, s);
  // class 0: (1 + 1 + 0.4) / 3 = 0.8; class 1: 0.6 / 1 = 0.6; normalized 0.8/1.4, 0.6/1.4.
  CHECK(rows(0, 0) == doctest::Approx(0.8 / 1.4).epsilon(1e-15));
  CHECK(rows(0, 1) == doctest::Approx(0.6 / 1.4).epsilon(1e-15));
}

TEST_CASE("PSL: uniform outputs") {
  SourceLabelSets s({{0, 1}, {1, 2, 3}});
  const auto rows = generate_psl({{{0.5, 0.5}}, {{1.0 / 3, 1.0 / 3, 1.0 / 3}}}, s);
  CHECK(numkit::ProbVector::is_valid(rows.row(0)));
  for (std::size_t c = 0; c < 4; ++c) CHECK(rows(0, c) > 0.0);
  CHECK(rows(0, 2) == doctest::Approx(rows(0, 3)));
}

TEST_CASE("PSL: rejects a source output that is not a distribution") {
  SourceLabelSets s({{0, 1}});
  CHECK_THROWS_AS(generate_psl({{{0.7, 0.7}}}, s), ProtocolError);
  CHECK_THROWS_AS(generate_psl({{{1.0}}}, s), ProtocolError);
}

TEST_CASE("update_pseudo_targets: boundary values of phi") {
  Rng rng(3);
  const Matrix init = oracle::random_distributions(rng, 5, 4);
  const Matrix bank = oracle::random_distributions(rng, 5, 4);
  const std::vector<Division> div{Division::kShared, Division::kUnknown, Division::kShared,
                                  Division::kUnknown, Division::kShared};
  {
    auto s = PseudoLabelState::init(init);
    update_pseudo_targets(s, div, bank, 1.0);
    CHECK(s.current == init);
  }
  {
    auto s = PseudoLabelState::init(init);
    update_pseudo_targets(s, div, bank, 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        const double z = div[i] == Division::kShared
                             ? (c == numkit::argmax(bank.row(i)) ? 1.0 : 0.0)
                             : 0.25;
        CHECK(s.current(i, c) == z);
      }
    }
  }
}

TEST_CASE("update_pseudo_targets: smoothing example") {
  Matrix hot(1, 4);
  hot(0, 2) = 1.0;
  auto s = PseudoLabelState::init(hot);
  update_pseudo_targets(s, std::vector<Division>{Division::kUnknown}, Matrix(1, 4), 0.5);
  const Vec want{0.125, 0.125, 0.625, 0.125};
  for (std::size_t c = 0; c < 4; ++c) CHECK(s.current(0, c) == doctest::Approx(want[c]).epsilon(1e-15));
  CHECK(s.previous == hot);
  CHECK(s.epoch == 1);
}

TEST_CASE("update_pseudo_targets: stable shared argmax sharpens toward one") {
  Rng rng(4);
  auto s = PseudoLabelState::init(oracle::random_distributions(rng, 1, 5));
  Matrix bank(1, 5);
  bank(0, 3) = 1.0;
  double prev = s.current(0, 3);
  for (int e = 0; e < 200; ++e) {
    update_pseudo_targets(s, std::vector<Division>{Division::kShared}, bank, 0.8);
    CHECK(s.current(0, 3) >= prev - 1e-15);
    prev = s.current(0, 3);
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("update_pseudo_targets: rows stay distributions") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = PseudoLabelState::init(oracle::random_distributions(rng, 20, 6));
  for (int t = 0; t < 300; ++t) {
    std::vector<Division> div(20);
    for (auto& d : div) d = u(rng) < 0.5 ? Division::kShared : Division::kUnknown;
    Matrix bank(20, 6);
    for (double& v : bank.data()) v = u(rng) * 2.0 - 1.0;
    update_pseudo_targets(s, div, bank, u(rng));
    CHECK(s.valid());
  }
}

TEST_CASE("update_pseudo_targets: bad inputs") {
  auto s = PseudoLabelState::init(Matrix(2, 3, 1.0 / 3));
  const std::vector<Division> div(2, Division::kShared);
  CHECK_THROWS_AS(update_pseudo_targets(s, div, Matrix(2, 3), 1.5), ConfigError);
  CHECK_THROWS_AS(update_pseudo_targets(s, div, Matrix(2, 4), 0.5), ConfigError);
  CHECK_THROWS_AS(update_pseudo_targets(s, std::vector<Division>(3), Matrix(2, 3), 0.5),
                  ConfigError);
}

TEST_CASE("candidate mask restricts the sharpening target") {
  SourceLabelSets sp({{0, 1}, {1, 2}});
  auto s = PseudoLabelState::init(generate_phl({{0}, {0}}, sp));
  merge_candidates(s, candidate_mask({{0}, {0}}, sp));
  Matrix bank(1, 3);
  bank(0, 2) = 5.0;
  bank(0, 0) = 1.0;
  update_pseudo_targets(s, std::vector<Division>{Division::kShared}, bank, 0.0);
  CHECK(s.current(0, 0) == 1.0);
}

TEST_CASE("blend_fresh") {
  auto s = PseudoLabelState::init(Matrix(1, 2, 0.5));
  Matrix fresh(1, 2);
  fresh(0, 0) = 1.0;
  blend_fresh(s, fresh, 0.9);
  CHECK(s.current(0, 0) == doctest::Approx(0.55));
  CHECK(s.current(0, 1) == doctest::Approx(0.45));
  CHECK_THROWS_AS(blend_fresh(s, Matrix(2, 2), 0.9), ConfigError);
}

TEST_CASE("write_csv prints one row per sample") {
  std::ostringstream out;
  Matrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 0.25;
  m(1, 0) = 0.75;
  write_csv(out, m);
  CHECK(out.str().find('\n') != std::string::npos);
  std::size_t lines = 0;
  for (char ch : out.str()) lines += ch == '\n';
  CHECK(lines >= 2);
}

}  // TEST_SUITE
