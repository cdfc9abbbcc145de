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

// Target pseudo-labels over the union of the source label sets.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ufda/numkit.hpp"
#include "ufda/scenario.hpp"

namespace ufda::pseudo_label {

// Per-sample GMM verdict. kShared is W1 (low self-entropy), kUnknown is W0.
enum class Division : std::uint8_t { kUnknown = 0, kShared = 1 };

// One row per target sample, one column per union class. Every row of
// `current` and `previous` is a distribution.
struct PseudoLabelState {
  numkit::Matrix current;
  numkit::Matrix previous;
  // Optional 0/1 mask of classes voted for by at least one source. When set,
  // the sharpening target is restricted to these classes.
  numkit::Matrix candidates;
  std::size_t epoch = 0;

  // Starts with current == previous == initial.
  static PseudoLabelState init(numkit::Matrix initial);

  std::size_t num_samples() const { return current.rows(); }
  std::size_t num_classes() const { return current.cols(); }
  // True when every row of both snapshots is a valid distribution.
  bool valid(double tol = numkit::ProbVector::kSumTolerance) const;
};

// Pseudo-hot labels: votes[m][i] is source m's local class for sample i.
// Row i is the average of the M one-hot votes mapped into the union.
// Throws ProtocolError for a vote outside its source's label set or ragged
// vote lists.
numkit::Matrix generate_phl(const std::vector<std::vector<std::size_t>>& votes,
                            const scenario::SourceLabelSets& space);

// Pseudo-soft labels: soft[m][i] is source m's distribution over its local
// classes. Each union class averages the sources that contain it, then the
// row is renormalized.
numkit::Matrix generate_psl(const std::vector<std::vector<numkit::Vec>>& soft,
                            const scenario::SourceLabelSets& space);

// 0/1 mask of the classes voted by any source, per sample.
numkit::Matrix candidate_mask(const std::vector<std::vector<std::size_t>>& votes,
                              const scenario::SourceLabelSets& space);

// Element-wise max of the state's mask and `mask`; sets it when empty.
void merge_candidates(PseudoLabelState& state, const numkit::Matrix& mask);

// Sharpen/smooth update:
//   z_i   = onehot(argmax bank_i) for W1, uniform for W0
// The argmax only ranges over candidate classes when a mask is present.
//   new_i = phi (phi cur_i + (1 - phi) prev_i) + (1 - phi) z_i
// The old current row becomes the new previous row.
void update_pseudo_targets(PseudoLabelState& state, std::span<const Division> division,
                           const numkit::Matrix& bank_rows, double phi);

// Merges freshly generated labels after a communication event:
// cur <- phi cur + (1 - phi) fresh. `previous` is left alone.
void blend_fresh(PseudoLabelState& state, const numkit::Matrix& fresh, double phi);

// "sample,p0,p1,..." with a header line.
void write_csv(std::ostream& out, const numkit::Matrix& rows);

}  // namespace ufda::pseudo_label
