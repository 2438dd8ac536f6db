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

#include "rdpkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rdpkit/error.hpp"

namespace rdp {

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

LogWeight logsumexp(std::span<const LogWeight> values) {
  if (values.empty()) throw ConfigError("empty reduction");
  double max = kNegInf;
  for (double v : values) {
    if (std::isnan(v)) throw NumericalError("logsumexp: NaN input");
    max = std::max(max, v);
  }
  if (max == kNegInf || std::isinf(max)) return max;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - max);
  return max + std::log(acc);
}

std::vector<int> topk_indices(std::span<const double> weights, std::size_t k1) {
  if (k1 > weights.size()) {
    throw ConfigError("topk_indices: K1 exceeds the number of weights");
  }
  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  auto before = [&](int a, int b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k1),
                    order.end(), before);
  order.resize(k1);
  return order;
}

std::vector<TailDraw> sample_tail(std::span<const double> weights,
                                  std::span<const int> topk, std::size_t k2,
                                  Rng& rng) {
  std::vector<char> in_top(weights.size(), 0);
  for (int i : topk) {
    if (i < 0 || static_cast<std::size_t>(i) >= weights.size()) {
      throw ConfigError("sample_tail: top-K index out of range");
    }
    in_top[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> tail;
  std::vector<double> cumulative;
  double mass = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0 || std::isnan(weights[i])) {
      throw ConfigError("sample_tail: weights must be nonnegative");
    }
    if (in_top[i] || weights[i] == 0.0) continue;
    mass += weights[i];
    tail.push_back(static_cast<int>(i));
    cumulative.push_back(mass);
  }
  if (k2 == 0) return {};
  if (tail.empty() || !(mass > 0.0)) throw DegenerateTailError();

  std::vector<TailDraw> draws;
  draws.reserve(k2);
  for (std::size_t s = 0; s < k2; ++s) {
    const double u = rng.uniform() * mass;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const int index = tail[static_cast<std::size_t>(it - cumulative.begin())];
    draws.push_back({index, weights[static_cast<std::size_t>(index)] / mass});
  }
  return draws;
}

std::vector<double> gumbel_noise(Rng& rng, std::size_t count) {
  std::vector<double> out(count);
  for (double& g : out) g = -std::log(-std::log(rng.uniform_open()));
  return out;
}

}  // namespace rdp
