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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ufda/numkit.hpp"

namespace ufda::scenario {

using ClassId = int;

// Shared/unknown class counts per domain. Column m < M describes source m,
// the last column describes the target.
struct UmdaMatrix {
  std::vector<int> shared_counts;   // |C_1| ... |C_M|, |C|
  std::vector<int> unknown_counts;  // |Cbar_s1| ... |Cbar_sM|, |Cbar_t|

  std::size_t num_sources() const { return shared_counts.size() - 1; }
  int target_shared() const { return shared_counts.back(); }
  int target_unknown() const { return unknown_counts.back(); }

  bool operator==(const UmdaMatrix&) const = default;
};

// Validates a 2 x (M+1) grid. Throws ConfigError.
UmdaMatrix parse_umda_matrix(const std::vector<std::vector<int>>& rows);

// How the source shared sets C_m overlap inside C.
enum class OverlapPolicy {
  kEmptyIntersection,  // pairwise disjoint; needs sum |C_m| == |C|
  kNested,             // prefixes of one ordering of C; needs max |C_m| == |C|
  kRandom,             // random subsets covering C; needs max |C_m| <= |C| <= sum |C_m|
};

OverlapPolicy parse_overlap_policy(std::string_view name);
std::string to_string(OverlapPolicy policy);

// The part of the label space a target client is allowed to know: each
// source's label set and their union, the pseudo-label set. Classes are
// addressed either by global id or by position ("union index") in the sorted
// union.
class SourceLabelSets {
 public:
  SourceLabelSets() = default;
  // Each per-source list is sorted and de-duplicated; the local index of a
  // class is its position in that sorted list.
  explicit SourceLabelSets(std::vector<std::vector<ClassId>> per_source);

  std::size_t num_sources() const { return per_source_.size(); }
  std::span<const ClassId> source_classes(std::size_t m) const { return per_source_.at(m); }
  std::size_t source_size(std::size_t m) const { return per_source_.at(m).size(); }

  // Throws ProtocolError for a local index outside the source's set.
  ClassId to_global(std::size_t m, std::size_t local) const;
  std::optional<std::size_t> to_local(std::size_t m, ClassId global) const;
  bool source_has(std::size_t m, ClassId global) const;

  std::span<const ClassId> union_classes() const { return union_; }
  std::size_t num_union() const { return union_.size(); }
  std::optional<std::size_t> union_index(ClassId global) const;
  ClassId union_class(std::size_t index) const { return union_.at(index); }
  // Union index of source m's local class.
  std::size_t local_to_union(std::size_t m, std::size_t local) const;
  // Number of sources whose label set contains the union class.
  std::size_t coverage(std::size_t union_idx) const { return coverage_.at(union_idx); }

  bool operator==(const SourceLabelSets&) const = default;

 private:
  std::vector<std::vector<ClassId>> per_source_;
  std::vector<ClassId> union_;
  std::vector<std::vector<std::size_t>> local_to_union_;
  std::vector<std::size_t> coverage_;
};

// Full realized label structure, including the target side that is only
// used for scenario construction and evaluation.
struct LabelSpace {
  SourceLabelSets sources;                          // C_{s_m} and the union
  std::vector<std::vector<ClassId>> source_shared;  // C_m
  std::vector<std::vector<ClassId>> source_private; // Cbar_{s_m}
  std::vector<ClassId> shared;                      // C
  std::vector<ClassId> target_unknown;              // Cbar_t
  std::vector<ClassId> target;                      // C_t = C u Cbar_t
  std::size_t num_global_classes = 0;

  bool is_target_unknown(ClassId c) const;
  bool is_shared(ClassId c) const;
};

// Realizes the matrix. Global ids: [0, |C|) shared, then each source's
// private classes in source order, then the target-unknown classes.
// Throws ConfigError when the counts cannot be realized under `policy`.
LabelSpace build_label_spaces(const UmdaMatrix& matrix, OverlapPolicy policy, numkit::Rng& rng);

// Samples of one domain. Row i of `features` has label labels[i].
struct DomainDataset {
  std::size_t domain = 0;
  numkit::Matrix features;
  std::vector<ClassId> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  bool operator==(const DomainDataset&) const = default;
};

// Fixed class anchors shared by every domain: Gaussian draws rescaled so the
// minimum pairwise distance equals `min_distance`.
numkit::Matrix make_anchors(std::size_t num_classes, std::size_t dim, double min_distance,
                            numkit::Rng& rng);

// x -> R x + t with R = exp(s K) for a random skew-symmetric K and t = s t0.
// shift_strength s = 0 gives the identity map.
struct DomainShift {
  numkit::Matrix rotation;
  numkit::Vec translation;

  numkit::Vec apply(std::span<const double> x) const;
};

DomainShift make_domain_shift(std::size_t dim, double shift_strength, double rotation_scale,
                              double translation_scale, numkit::Rng& rng);

// exp(A) by scaling and squaring; used for the rotation part of DomainShift.
numkit::Matrix matrix_exp(const numkit::Matrix& a);

// Draws n_per_class samples for each class in `classes`: shifted anchor plus
// isotropic Gaussian noise.
DomainDataset generate_domain(std::span<const ClassId> classes, const numkit::Matrix& anchors,
                              const DomainShift& shift, std::size_t domain,
                              std::size_t n_per_class, double noise_std, numkit::Rng& rng);

struct ScenarioConfig {
  UmdaMatrix matrix{{4, 4, 4, 10}, {2, 2, 2, 5}};
  OverlapPolicy overlap = OverlapPolicy::kRandom;
  std::size_t dim = 16;
  std::size_t n_per_class = 100;
  double shift_strength = 0.5;
  double rotation_scale = 1.0;
  double translation_scale = 1.0;
  double noise_std = 0.3;
  double anchor_min_distance = 4.0;
};

// A generated scenario: sources 0..M-1 and the target (domain id M).
struct Scenario {
  ScenarioConfig config;
  LabelSpace space;
  numkit::Matrix anchors;
  std::vector<DomainShift> shifts;       // one per domain, target last
  std::vector<DomainDataset> sources;
  DomainDataset target;
};

// Pure function of (config, seed).
Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

// Independent engine for a named stream of a seeded run.
numkit::Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

// Dataset dump (see docs/formats.md).
void write_dataset(std::ostream& out, const DomainDataset& data,
                   std::span<const ClassId> label_set);
DomainDataset read_dataset(std::istream& in, std::vector<ClassId>* label_set = nullptr);

}  // namespace ufda::scenario
