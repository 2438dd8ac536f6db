// Copyright 2026 The rdp-kit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "rdpkit/autodiff.hpp"
#include "rdpkit/numerics.hpp"
#include "rdpkit/selection.hpp"

namespace rdp::tree {

// Number of spans [i, j], 0 <= i <= j < length.
constexpr std::size_t num_spans(std::size_t length) {
  return length * (length + 1) / 2;
}

// Spans ordered by start, then end.
constexpr std::size_t span_index(std::size_t i, std::size_t j,
                                 std::size_t length) {
  return i * length - (i * (i - 1)) / 2 + (j - i);
}

// Span-and-label log-potentials phi(i, j, k) of a distribution over labeled
// binary bracketings of a length-T sentence.
template <class S>
struct BasicHypertreePotentials {
  std::size_t length = 0;
  std::size_t num_states = 0;
  std::vector<S> span_potentials;  // num_spans(length) * N

  BasicHypertreePotentials() = default;
  BasicHypertreePotentials(std::size_t t, std::size_t n, S fill = S(0.0))
      : length(t), num_states(n), span_potentials(num_spans(t) * n, fill) {}

  S& at(std::size_t i, std::size_t j, std::size_t k) {
    return span_potentials[span_index(i, j, length) * num_states + k];
  }
  const S& at(std::size_t i, std::size_t j, std::size_t k) const {
    return span_potentials[span_index(i, j, length) * num_states + k];
  }
};

using HypertreePotentials = BasicHypertreePotentials<double>;
using TapeHypertreePotentials = BasicHypertreePotentials<ad::Var>;

void validate(const HypertreePotentials& p);

TapeHypertreePotentials attach(ad::Tape& tape, const HypertreePotentials& p);

// Which blocks of the child-label cross product enter the recursion.
enum class InsideBlocks {
  // top x top, top x sampled, sampled x top, sampled x sampled.
  kFullCross,
  // top x top and sampled x sampled only.
  kTwoBlock,
};

// Inside values per span (indexed by span_index), aligned with
// selection.active(span).
template <class S>
struct InsideResult {
  S log_z;
  std::vector<std::vector<S>> inside;
  std::uint64_t fingerprint = 0;
};

template <class S>
InsideResult<S> exact_inside(const BasicHypertreePotentials<S>& p);

template <class S>
InsideResult<S> randomized_inside(const BasicHypertreePotentials<S>& p,
                                  const Selection& selection,
                                  InsideBlocks blocks = InsideBlocks::kFullCross);

struct LabeledTree {
  std::vector<std::pair<int, int>> spans;
  std::vector<int> labels;
  double log_weight = 0.0;
  double probability = 0.0;
};

struct BruteForceTrees {
  double log_z = 0.0;
  std::vector<LabeledTree> trees;
};

inline constexpr double kBruteForceLimit = 1e6;

BruteForceTrees brute_force_trees(const HypertreePotentials& p);

extern template InsideResult<double> exact_inside(const HypertreePotentials&);
extern template InsideResult<ad::Var> exact_inside(
    const TapeHypertreePotentials&);
extern template InsideResult<double> randomized_inside(
    const HypertreePotentials&, const Selection&, InsideBlocks);
extern template InsideResult<ad::Var> randomized_inside(
    const TapeHypertreePotentials&, const Selection&, InsideBlocks);

}  // namespace rdp::tree
