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

// Random instance generators shared by the unit tests.

#pragma once

#include <cstddef>

#include "rdpkit/chain.hpp"
#include "rdpkit/hypertree.hpp"
#include "rdpkit/rng.hpp"

namespace rdp::testing {

inline chain::ChainPotentials random_chain(std::size_t length, std::size_t n,
                                           Rng& rng, double scale = 1.0) {
  chain::ChainPotentials p(length, n);
  for (double& v : p.init) v = scale * rng.normal();
  for (double& v : p.pairwise) v = scale * rng.normal();
  return p;
}

inline tree::HypertreePotentials random_tree(std::size_t length, std::size_t n,
                                             Rng& rng, double scale = 1.0) {
  tree::HypertreePotentials p(length, n);
  for (double& v : p.span_potentials) v = scale * rng.normal();
  return p;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

}  // namespace rdp::testing
