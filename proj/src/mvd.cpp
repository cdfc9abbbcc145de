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

#include "ufda/mvd.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <ostream>

#include "ufda/error.hpp"

namespace ufda::mvd {

ClusterTable build_clusters(const std::vector<std::vector<std::size_t>>& source_votes,
                            std::span<const std::size_t> target_predictions,
                            const scenario::SourceLabelSets& space) {
  if (source_votes.size() != space.num_sources()) {
    throw ProtocolError("build_clusters: expected one vote list per source");
  }
  const std::size_t n = target_predictions.size();
  const std::size_t k = space.num_union();
  ClusterTable t;
  t.num_samples = n;
  t.target.assign(k, {});
  t.source.assign(space.num_sources(), std::vector<SampleSet>(k));
  t.source_has.assign(space.num_sources(), std::vector<bool>(k, false));
  for (std::size_t m = 0; m < space.num_sources(); ++m) {
    if (source_votes[m].size() != n) {
      throw ProtocolError("build_clusters: source " + std::to_string(m) +
                          " voted on a different number of samples");
    }
    for (std::size_t local = 0; local < space.source_size(m); ++local) {
      t.source_has[m][space.local_to_union(m, local)] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      t.source[m][space.local_to_union(m, source_votes[m][i])].push_back(i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (target_predictions[i] >= k) throw ProtocolError("target prediction outside the union");
    t.target[target_predictions[i]].push_back(i);
  }
  return t;
}

PairScore pair_score(const ClusterTable& table, std::size_t union_class, std::size_t source) {
  const SampleSet& bs = table.source.at(source).at(union_class);
  const SampleSet& bt = table.target.at(union_class);
  PairScore s;
  s.source_size = bs.size();
  s.target_size = bt.size();
  // Both lists are sorted by construction.
  std::size_t a = 0, b = 0;
  while (a < bs.size() && b < bt.size()) {
    if (bs[a] < bt[b]) {
      ++a;
    } else if (bt[b] < bs[a]) {
      ++b;
    } else {
      ++s.overlap;
      ++a;
      ++b;
    }
  }
  const double ov = static_cast<double>(s.overlap);
  s.source_view = s.source_size ? ov / static_cast<double>(s.source_size) : 0.0;
  s.target_view = s.target_size ? ov / static_cast<double>(s.target_size) : 0.0;
  return s;
}

ViewScores voting_scores(const ClusterTable& table) {
  const std::size_t k = table.num_classes();
  ViewScores v{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t m = 0; m < table.num_sources(); ++m) {
      if (!table.source_has[m][c]) continue;
      const PairScore s = pair_score(table, c, m);
      v.source_view[c] = std::max(v.source_view[c], s.source_view);
      v.target_view[c] = std::max(v.target_view[c], s.target_view);
    }
  }
  return v;
}

std::vector<double> mutual_scores(std::span<const double> d_s, std::span<const double> d_t) {
  if (d_s.size() != d_t.size()) throw ConfigError("mutual_scores: view sizes differ");
  std::vector<double> s(d_s.size());
  for (std::size_t c = 0; c < s.size(); ++c) s[c] = (d_s[c] + d_t[c]) / 2.0;
  return s;
}

std::vector<Verdict> decide_shared(std::span<const double> scores, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0,1]");
  std::vector<Verdict> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s >= lambda ? Verdict::kShared : Verdict::kUnknown);
  return out;
}

std::string to_string(View view) {
  switch (view) {
    case View::kBoth:
      return "both";
    case View::kSource:
      return "source";
    case View::kTarget:
      return "target";
  }
  return "both";
}

View parse_view(const std::string& name) {
  if (name == "both") return View::kBoth;
  if (name == "source") return View::kSource;
  if (name == "target") return View::kTarget;
  throw ConfigError("unknown MVD view '" + name + "'");
}

VotingTable decide(const ClusterTable& table, const scenario::SourceLabelSets& space,
                   double lambda, View view) {
  if (table.num_classes() != space.num_union()) {
    throw ConfigError("cluster table does not match the label space");
  }
  VotingTable vt;
  vt.classes.assign(space.union_classes().begin(), space.union_classes().end());
  auto scores = voting_scores(table);
  vt.d_s = std::move(scores.source_view);
  vt.d_t = std::move(scores.target_view);
  vt.mutual = mutual_scores(vt.d_s, vt.d_t);
  switch (view) {
    case View::kBoth:
      vt.verdict = decide_shared(vt.mutual, lambda);
      break;
    case View::kSource:
      vt.verdict = decide_shared(vt.d_s, lambda);
      break;
    case View::kTarget:
      vt.verdict = decide_shared(vt.d_t, lambda);
      break;
  }
  return vt;
}

std::vector<ClassId> final_predict(std::span<const std::size_t> target_predictions,
                                   std::span<const Verdict> verdicts,
                                   const scenario::SourceLabelSets& space) {
  if (verdicts.size() != space.num_union()) throw ConfigError("verdicts do not cover the union");
  std::vector<ClassId> out;
  out.reserve(target_predictions.size());
  for (std::size_t u : target_predictions) {
    if (u >= verdicts.size()) throw ProtocolError("prediction outside the union");
    out.push_back(verdicts[u] == Verdict::kShared ? space.union_class(u) : kUnknownClass);
  }
  return out;
}

void write_csv(std::ostream& out, const VotingTable& table) {
  out << "class,d_s,d_t,S,verdict\n";
  char buf[128];
  for (std::size_t c = 0; c < table.classes.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%s", table.classes[c], table.d_s[c],
                  table.d_t[c], table.mutual[c],
                  table.verdict[c] == Verdict::kShared ? "shared" : "unknown");
    out << buf << '\n';
  }
}

}  // namespace ufda::mvd
