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

#include <sstream>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "ufda/error.hpp"
#include "ufda/mvd.hpp"

using namespace ufda;
using namespace ufda::mvd;
using numkit::Rng;
using scenario::SourceLabelSets;

TEST_SUITE("mvd") {

TEST_CASE("unanimous predictions give full clusters and perfect scores") {
  SourceLabelSets s({{0, 1}, {0, 2}});
  const std::vector<std::vector<std::size_t>> votes{{0, 0, 0}, {0, 0, 0}};
  const std::vector<std::size_t> target{0, 0, 0};
  const auto t = build_clusters(votes, target, s);
  CHECK(t.source[0][0] == SampleSet{0, 1, 2});
  CHECK(t.source[1][0] == SampleSet{0, 1, 2});
  CHECK(t.target[0] == SampleSet{0, 1, 2});
  CHECK(t.target[1].empty());
  const auto v = decide(t, s, 1.0);
  CHECK(v.mutual[0] == 1.0);
  CHECK(v.verdict[0] == Verdict::kShared);
  CHECK(v.mutual[1] == 0.0);
  CHECK(v.verdict[1] == Verdict::kUnknown);
}

TEST_CASE("cluster sizes match a counting oracle") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto f = oracle::random_vote_fixture(rng, 40, 4, 8);
    const auto table = build_clusters(f.votes, f.target, f.space);
    for (std::size_t u = 0; u < f.space.num_union(); ++u) {
      std::size_t count = 0;
      for (std::size_t p : f.target) count += p == u;
      CHECK(table.target[u].size() == count);
      for (std::size_t m = 0; m < f.votes.size(); ++m) {
        std::size_t c = 0;
        for (std::size_t v : f.votes[m]) c += f.space.local_to_union(m, v) == u;
        CHECK(table.source[m][u].size() == c);
      }
    }
  }
}

TEST_CASE("pair scores on a hand-counted fixture") {
  // |B_S| = 10, |B_T| = 20, overlap 5.
  SourceLabelSets s({{0, 1}});
  std::vector<std::size_t> votes(30, 1), target(30, 1);
  for (std::size_t i = 0; i < 10; ++i) votes[i] = 0;
  for (std::size_t i = 5; i < 25; ++i) target[i] = 0;
  const auto t = build_clusters({votes}, target, s);
  const auto p = pair_score(t, 0, 0);
  CHECK(p.overlap == 5);
  CHECK(p.source_view == 0.5);
  CHECK(p.target_view == 0.25);
  const auto d = voting_scores(t);
  CHECK(mutual_scores(std::vector<double>{d.source_view[0]},
                      std::vector<double>{d.target_view[0]})[0] == 0.375);
}

TEST_CASE("disjoint clusters score zero") {
  SourceLabelSets s({{0, 1}});
  const auto t = build_clusters({{0, 0, 1, 1}}, std::vector<std::size_t>{1, 1, 0, 0}, s);
  const auto d = voting_scores(t);
  CHECK(d.source_view[0] == 0.0);
  CHECK(d.target_view[0] == 0.0);
}

TEST_CASE("mutual score arithmetic") {
  const std::vector<double> a{1.0, 0.0, 0.5}, b{1.0, 0.0, 0.25};
  CHECK(mutual_scores(a, b) == std::vector<double>{1.0, 0.0, 0.375});
}

TEST_CASE("decide_shared threshold") {
  CHECK(decide_shared(std::vector<double>{1.0}, 0.4)[0] == Verdict::kShared);
  CHECK(decide_shared(std::vector<double>{0.0}, 0.01)[0] == Verdict::kUnknown);
  CHECK(decide_shared(std::vector<double>{0.4}, 0.4)[0] == Verdict::kShared);
  CHECK_THROWS_AS(decide_shared(std::vector<double>{0.4}, 1.5), ConfigError);
}

TEST_CASE("lambda sweep only flips classes inside the band") {
  const std::vector<double> s{0.05, 0.29, 0.3, 0.35, 0.45, 0.5, 0.51, 0.9};
  const auto lo = decide_shared(s, 0.3);
  const auto hi = decide_shared(s, 0.5);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool in_band = s[i] >= 0.3 && s[i] < 0.5;
    CHECK((lo[i] != hi[i]) == in_band);
  }
}

TEST_CASE("final_predict") {
  SourceLabelSets s({{3, 5}, {5, 8}});
  const std::vector<std::size_t> pred{0, 1, 2, 1};
  CHECK(final_predict(pred, std::vector<Verdict>(3, Verdict::kShared), s) ==
        std::vector<ClassId>{3, 5, 8, 5});
  CHECK(final_predict(pred, std::vector<Verdict>(3, Verdict::kUnknown), s) ==
        std::vector<ClassId>(4, kUnknownClass));
  const std::vector<Verdict> mixed{Verdict::kShared, Verdict::kUnknown, Verdict::kShared};
  const auto out = final_predict(pred, mixed, s);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const ClassId want = mixed[pred[i]] == Verdict::kShared ? s.union_class(pred[i]) : kUnknownClass;
    CHECK(out[i] == want);
  }
}

TEST_CASE("brute-force equivalence and the min-denominator identity") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto f = oracle::random_vote_fixture(rng, 50, 4, 8);
    const auto table = build_clusters(f.votes, f.target, f.space);
    const auto got = decide(table, f.space, 0.4);
    const auto want = oracle::brute_force_scores(f);
    CHECK(got.d_s == want.d_s);
    CHECK(got.d_t == want.d_t);
    CHECK(got.mutual == want.mutual);
    for (std::size_t u = 0; u < table.num_classes(); ++u) {
      for (std::size_t m = 0; m < table.num_sources(); ++m) {
        if (!table.source_has[m][u]) continue;
        const auto p = pair_score(table, u, m);
        const std::size_t mn = std::min(p.source_size, p.target_size);
        const double id = mn == 0 ? 0.0 : static_cast<double>(p.overlap) / static_cast<double>(mn);
        CHECK(std::max(p.source_view, p.target_view) == id);
      }
    }
  }
}

TEST_CASE("scores grow with the overlap") {
  // Cluster sizes fixed at 6 (source) and 6 (target); overlap grows from 0 to 6.
  SourceLabelSets s({{0, 1}});
  double prev_s = -1.0;
  for (std::size_t ov = 0; ov <= 6; ++ov) {
    std::vector<std::size_t> votes(12, 1), target(12, 1);
    for (std::size_t i = 0; i < 6; ++i) votes[i] = 0;
    for (std::size_t i = 6 - ov; i < 12 - ov; ++i) target[i] = 0;
    const auto v = decide(build_clusters({votes}, target, s), s, 0.4);
    CHECK(v.mutual[0] >= prev_s);
    prev_s = v.mutual[0];
  }
  CHECK(prev_s == 1.0);
}

TEST_CASE("single-view ablations") {
  SourceLabelSets s({{0, 1}});
  std::vector<std::size_t> votes(30, 1), target(30, 1);
  for (std::size_t i = 0; i < 10; ++i) votes[i] = 0;
  for (std::size_t i = 5; i < 25; ++i) target[i] = 0;
  const auto t = build_clusters({votes}, target, s);
  CHECK(decide(t, s, 0.4, View::kSource).verdict[0] == Verdict::kShared);
  CHECK(decide(t, s, 0.4, View::kTarget).verdict[0] == Verdict::kUnknown);
  CHECK(decide(t, s, 0.4, View::kBoth).verdict[0] == Verdict::kUnknown);
  CHECK(parse_view("source") == View::kSource);
  CHECK(to_string(View::kTarget) == "target");
  CHECK_THROWS_AS(parse_view("diagonal"), ConfigError);
}

TEST_CASE("shape errors") {
  SourceLabelSets s({{0, 1}, {1}});
  CHECK_THROWS_AS(build_clusters({{0}}, std::vector<std::size_t>{0}, s), ProtocolError);
  CHECK_THROWS_AS(build_clusters({{0}, {0, 0}}, std::vector<std::size_t>{0}, s), ProtocolError);
  CHECK_THROWS_AS(build_clusters({{0}, {0}}, std::vector<std::size_t>{7}, s), ProtocolError);
}

TEST_CASE("voting csv has a header and one row per class") {
  SourceLabelSets s({{0, 1}});
  const auto v = decide(build_clusters({{0, 1}}, std::vector<std::size_t>{0, 1}, s), s, 0.4);
  std::ostringstream out;
  write_csv(out, v);
  CHECK(out.str().rfind("class,d_s,d_t,S,verdict\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : out.str()) lines += c == '\n';
  CHECK(lines == 3);
}

}  // TEST_SUITE
