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
#include <span>
#include <vector>

#include "rdpkit/autodiff.hpp"
#include "rdpkit/numerics.hpp"
#include "rdpkit/selection.hpp"

namespace rdp::chain {

// Log-potentials of an unnormalized chain over `length` steps and
// `num_states` states. init[i] scores x_1 = i; pair(t, j, i) scores the move
// x_{t+1} = j -> x_{t+2} = i (0-based t), emission included.
template <class S>
struct BasicChainPotentials {
  std::size_t length = 0;
  std::size_t num_states = 0;
  std::vector<S> init;
  std::vector<S> pairwise;  // (length - 1) * N * N, row-major [t][from][to]

  BasicChainPotentials() = default;
  BasicChainPotentials(std::size_t t, std::size_t n, S fill = S(0.0))
      : length(t), num_states(n), init(n, fill),
        pairwise(t > 0 ? (t - 1) * n * n : 0, fill) {}

  S& pair(std::size_t t, std::size_t from, std::size_t to) {
    return pairwise[(t * num_states + from) * num_states + to];
  }
  const S& pair(std::size_t t, std::size_t from, std::size_t to) const {
    return pairwise[(t * num_states + from) * num_states + to];
  }
};

using ChainPotentials = BasicChainPotentials<double>;
using TapeChainPotentials = BasicChainPotentials<ad::Var>;

// Throws ConfigError on bad shapes, NaN or +infinity entries.
void validate(const ChainPotentials& p);

// Puts every potential on `tape` as a leaf. With a mask, only entries the
// masked selection can touch become leaves; the rest stay constants.
TapeChainPotentials attach(ad::Tape& tape, const ChainPotentials& p,
                           const Selection* mask = nullptr);

// Alpha values per step, aligned with selection.active(t).
template <class S>
struct ForwardResult {
  S log_z;
  std::vector<std::vector<S>> alpha;
  std::uint64_t fingerprint = 0;
};

template <class S>
ForwardResult<S> exact_forward(const BasicChainPotentials<S>& p);

template <class S>
ForwardResult<S> randomized_forward(const BasicChainPotentials<S>& p,
                                    const Selection& selection);

template <class S>
S exact_entropy(const BasicChainPotentials<S>& p);

// Conditional probabilities are floored at this value before the log.
inline constexpr double kEntropyProbFloor = 1e-300;

template <class S>
S randomized_entropy(const BasicChainPotentials<S>& p,
                     const Selection& selection,
                     const ForwardResult<S>& forward);

template <class S>
struct GumbelSample {
  std::vector<std::vector<int>> support;  // active states per step
  std::vector<std::vector<S>> soft;       // relaxed one-hot over support
  std::vector<int> hard;                  // states in [0, N)
};

// How sampled states enter the perturbed logits.
enum class GumbelLogits {
  // log p-hat + selection log-weight + g; restricted conditionals are
  // normalized over the active set.
  kImportanceWeighted,
  // log p-hat + g; sampled states count once, so the tail is under-weighted
  // and grows with K2.
  kUnweighted,
};

// `noise` is length * N standard Gumbel values indexed [t][state].
template <class S>
GumbelSample<S> gumbel_backward_sample(
    const BasicChainPotentials<S>& p, const Selection& selection,
    const ForwardResult<S>& forward, std::span<const double> noise,
    double temperature = 1.0, GumbelLogits mode = GumbelLogits::kImportanceWeighted);

struct BruteForceChain {
  double log_z = 0.0;
  double entropy = 0.0;
  std::vector<std::vector<int>> paths;
  std::vector<double> posterior;
};

inline constexpr double kBruteForceLimit = 1e6;

BruteForceChain brute_force_chain(const ChainPotentials& p);

// Score of a complete path: init + sum of pairwise terms.
template <class S>
S path_score(const BasicChainPotentials<S>& p, std::span<const int> path);

extern template ForwardResult<double> exact_forward(const ChainPotentials&);
extern template ForwardResult<ad::Var> exact_forward(const TapeChainPotentials&);
extern template ForwardResult<double> randomized_forward(const ChainPotentials&,
                                                         const Selection&);
extern template ForwardResult<ad::Var> randomized_forward(
    const TapeChainPotentials&, const Selection&);
extern template double exact_entropy(const ChainPotentials&);
extern template ad::Var exact_entropy(const TapeChainPotentials&);
extern template double randomized_entropy(const ChainPotentials&,
                                          const Selection&,
                                          const ForwardResult<double>&);
extern template ad::Var randomized_entropy(const TapeChainPotentials&,
                                           const Selection&,
                                           const ForwardResult<ad::Var>&);
extern template GumbelSample<double> gumbel_backward_sample(
    const ChainPotentials&, const Selection&, const ForwardResult<double>&,
    std::span<const double>, double, GumbelLogits);
extern template GumbelSample<ad::Var> gumbel_backward_sample(
    const TapeChainPotentials&, const Selection&, const ForwardResult<ad::Var>&,
    std::span<const double>, double, GumbelLogits);
extern template double path_score(const ChainPotentials&, std::span<const int>);
extern template ad::Var path_score(const TapeChainPotentials&,
                                   std::span<const int>);

}  // namespace rdp::chain
