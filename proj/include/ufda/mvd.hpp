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

// Mutual-voting decision: class-level agreement between the clusters formed
// by each source API and by the trained target model decides which union
// classes are kept and which are folded into a single "unknown" bucket.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ufda/scenario.hpp"

namespace ufda::mvd {

using scenario::ClassId;

// Final label for samples rejected as unknown.
inline constexpr ClassId kUnknownClass = -1;

using SampleSet = std::vector<std::size_t>;  // sorted sample ids

// Clusters indexed by union class. source[m][u] is empty (and source_has[m][u]
// false) when union class u is not in source m's label set.
struct ClusterTable {
  std::size_t num_samples = 0;
  std::vector<std::vector<SampleSet>> source;
  std::vector<std::vector<bool>> source_has;
  std::vector<SampleSet> target;

  std::size_t num_sources() const { return source.size(); }
  std::size_t num_classes() const { return target.size(); }
};

// source_votes[m][i] is source m's local class for sample i;
// target_predictions[i] is the target model's union class for sample i.
// Throws ProtocolError on inconsistent sample counts or out-of-set votes.
ClusterTable build_clusters(const std::vector<std::vector<std::size_t>>& source_votes,
                            std::span<const std::size_t> target_predictions,
                            const scenario::SourceLabelSets& space);

// Agreement of one (class, source) pair.
struct PairScore {
  std::size_t overlap = 0;       // |B_S cap B_T|
  std::size_t source_size = 0;   // |B_S|
  std::size_t target_size = 0;   // |B_T|
  double source_view = 0.0;      // overlap / |B_S|, 0 if empty
  double target_view = 0.0;      // overlap / |B_T|, 0 if empty
};

PairScore pair_score(const ClusterTable& table, std::size_t union_class, std::size_t source);

struct ViewScores {
  std::vector<double> source_view;  // d_s per union class
  std::vector<double> target_view;  // d_t per union class
};

// Per class, the maximum over the sources that contain it.
ViewScores voting_scores(const ClusterTable& table);

// (d_s + d_t) / 2 per class.
std::vector<double> mutual_scores(std::span<const double> d_s, std::span<const double> d_t);

enum class Verdict { kShared, kUnknown };

// Shared iff score >= lambda. Throws ConfigError for lambda outside [0,1].
std::vector<Verdict> decide_shared(std::span<const double> scores, double lambda);

// Which score drives the decision.
enum class View { kBoth, kSource, kTarget };
std::string to_string(View view);
View parse_view(const std::string& name);

struct VotingTable {
  std::vector<ClassId> classes;  // global id per union index
  std::vector<double> d_s;
  std::vector<double> d_t;
  std::vector<double> mutual;
  std::vector<Verdict> verdict;
};

// voting_scores -> mutual_scores -> decide_shared on the score selected by
// `view` (the single-view variants substitute d_s or d_t for the mutual score).
VotingTable decide(const ClusterTable& table, const scenario::SourceLabelSets& space,
                   double lambda, View view = View::kBoth);

// Keeps each sample's predicted class when its verdict is shared, otherwise
// returns kUnknownClass. Predictions are union indices; results are global ids.
std::vector<ClassId> final_predict(std::span<const std::size_t> target_predictions,
                                   std::span<const Verdict> verdicts,
                                   const scenario::SourceLabelSets& space);

// "class,d_s,d_t,S,verdict" rows.
void write_csv(std::ostream& out, const VotingTable& table);

}  // namespace ufda::mvd
