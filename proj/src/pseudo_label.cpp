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

#include "ufda/pseudo_label.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>

#include "ufda/error.hpp"

namespace ufda::pseudo_label {

using numkit::Matrix;
using numkit::Vec;

PseudoLabelState PseudoLabelState::init(Matrix initial) {
  PseudoLabelState s;
  s.previous = initial;
  s.current = std::move(initial);
  if (!s.valid()) throw InvariantError("initial pseudo-labels are not distributions");
  return s;
}

bool PseudoLabelState::valid(double tol) const {
  if (current.rows() != previous.rows() || current.cols() != previous.cols()) return false;
  for (std::size_t i = 0; i < current.rows(); ++i) {
    if (!numkit::ProbVector::is_valid(current.row(i), tol) ||
        !numkit::ProbVector::is_valid(previous.row(i), tol)) {
      return false;
    }
  }
  return true;
}

Matrix generate_phl(const std::vector<std::vector<std::size_t>>& votes,
                    const scenario::SourceLabelSets& space) {
  if (votes.size() != space.num_sources() || votes.empty()) {
    throw ProtocolError("generate_phl: expected one vote list per source");
  }
  const std::size_t n = votes.front().size();
  const double w = 1.0 / static_cast<double>(votes.size());
  Matrix rows(n, space.num_union());
  for (std::size_t m = 0; m < votes.size(); ++m) {
    if (votes[m].size() != n) throw ProtocolError("generate_phl: ragged vote lists");
    for (std::size_t i = 0; i < n; ++i) {
      rows(i, space.local_to_union(m, votes[m][i])) += w;
    }
  }
  return rows;
}

Matrix generate_psl(const std::vector<std::vector<Vec>>& soft,
                    const scenario::SourceLabelSets& space) {
  if (soft.size() != space.num_sources() || soft.empty()) {
    throw ProtocolError("generate_psl: expected one output list per source");
  }
  const std::size_t n = soft.front().size();
  Matrix rows(n, space.num_union());
  for (std::size_t m = 0; m < soft.size(); ++m) {
    if (soft[m].size() != n) throw ProtocolError("generate_psl: ragged output lists");
    for (std::size_t i = 0; i < n; ++i) {
      const Vec& p = soft[m][i];
      if (p.size() != space.source_size(m)) {
        throw ProtocolError("generate_psl: output width differs from the source label set");
      }
      if (!numkit::ProbVector::is_valid(p, 1e-6)) {
        throw ProtocolError("generate_psl: source output is not a distribution");
      }
      for (std::size_t k = 0; k < p.size(); ++k) rows(i, space.local_to_union(m, k)) += p[k];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto r = rows.row(i);
    double total = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      r[c] /= static_cast<double>(space.coverage(c));
      total += r[c];
    }
    if (!(total > 0.0)) throw DegenerateInputError("generate_psl: zero-mass row");
    for (double& v : r) v /= total;
  }
  return rows;
}

Matrix candidate_mask(const std::vector<std::vector<std::size_t>>& votes,
                      const scenario::SourceLabelSets& space) {
  if (votes.size() != space.num_sources() || votes.empty()) {
    throw ProtocolError("candidate_mask: expected one vote list per source");
  }
  const std::size_t n = votes.front().size();
  Matrix mask(n, space.num_union());
  for (std::size_t m = 0; m < votes.size(); ++m) {
    if (votes[m].size() != n) throw ProtocolError("candidate_mask: ragged vote lists");
    for (std::size_t i = 0; i < n; ++i) mask(i, space.local_to_union(m, votes[m][i])) = 1.0;
  }
  return mask;
}

void merge_candidates(PseudoLabelState& state, const Matrix& mask) {
  if (mask.rows() != state.num_samples() || mask.cols() != state.num_classes()) {
    throw ConfigError("merge_candidates: shape mismatch");
  }
  if (state.candidates.rows() == 0) {
    state.candidates = mask;
    return;
  }
  auto& dst = state.candidates.data();
  const auto& src = mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
}

namespace {

std::size_t masked_argmax(std::span<const double> row, std::span<const double> mask) {
  std::size_t best = row.size();
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (mask[c] <= 0.0) continue;
    if (best == row.size() || row[c] > row[best]) best = c;
  }
  return best == row.size() ? numkit::argmax(row) : best;
}

}  // namespace

void update_pseudo_targets(PseudoLabelState& state, std::span<const Division> division,
                           const Matrix& bank_rows, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw ConfigError("phi must be in [0,1]");
  const std::size_t n = state.num_samples();
  const std::size_t k = state.num_classes();
  if (division.size() != n || bank_rows.rows() != n || bank_rows.cols() != k) {
    throw ConfigError("update_pseudo_targets: shapes disagree with the pseudo-label state");
  }
  const bool masked = state.candidates.rows() != 0;
  if (masked && (state.candidates.rows() != n || state.candidates.cols() != k)) {
    throw ConfigError("update_pseudo_targets: candidate mask shape mismatch");
  }
  const double uniform = 1.0 / static_cast<double>(k);
  Matrix next(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cur = state.current.row(i);
    const auto prev = state.previous.row(i);
    const bool shared = division[i] == Division::kShared;
    std::size_t hot = 0;
    if (shared) {
      hot = masked ? masked_argmax(bank_rows.row(i), state.candidates.row(i))
                   : numkit::argmax(bank_rows.row(i));
    }
    auto out = next.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      const double z = shared ? (c == hot ? 1.0 : 0.0) : uniform;
      out[c] = phi * (phi * cur[c] + (1.0 - phi) * prev[c]) + (1.0 - phi) * z;
    }
  }
  state.previous = std::move(state.current);
  state.current = std::move(next);
  ++state.epoch;
}

void blend_fresh(PseudoLabelState& state, const Matrix& fresh, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw ConfigError("phi must be in [0,1]");
  if (fresh.rows() != state.current.rows() || fresh.cols() != state.current.cols()) {
    throw ConfigError("blend_fresh: shape mismatch");
  }
  auto& cur = state.current.data();
  const auto& add = fresh.data();
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = phi * cur[i] + (1.0 - phi) * add[i];
}

void write_csv(std::ostream& out, const Matrix& rows) {
  out << "sample";
  for (std::size_t c = 0; c < rows.cols(); ++c) out << ",p" << c;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    out << i;
    for (double v : rows.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace ufda::pseudo_label
