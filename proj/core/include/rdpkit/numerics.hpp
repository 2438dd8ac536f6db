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

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rdpkit/rng.hpp"

namespace rdp {

// Natural-log weight. -infinity encodes an exact zero; NaN is never valid.
using LogWeight = double;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double primal(double x) { return x; }

// log(sum(exp(values))) with max shift. Throws ConfigError("empty reduction")
// on an empty input and NumericalError on NaN.
LogWeight logsumexp(std::span<const LogWeight> values);

// Indices of the k1 largest weights, largest first, ties broken by ascending
// index.
std::vector<int> topk_indices(std::span<const double> weights, std::size_t k1);

struct TailDraw {
  int index = 0;
  // Probability of `index` under the proposal renormalized over the tail.
  double tail_prob = 0.0;

  friend bool operator==(const TailDraw&, const TailDraw&) = default;
};

// k2 i.i.d. draws (with replacement) from `weights` restricted to the
// complement of `topk` and renormalized there. Throws DegenerateTailError when
// k2 >= 1 and the tail has no mass.
std::vector<TailDraw> sample_tail(std::span<const double> weights,
                                  std::span<const int> topk, std::size_t k2,
                                  Rng& rng);

// `count` i.i.d. standard Gumbel draws, -log(-log(u)) with u in (0, 1).
std::vector<double> gumbel_noise(Rng& rng, std::size_t count);

}  // namespace rdp
