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
#include <span>

#include "rdpkit/chain.hpp"
#include "rdpkit/selection.hpp"

namespace rdp::proposals {

// Every weight 1/N. Throws ConfigError when N = 0.
Proposal uniform_proposal(std::size_t num_states, std::size_t num_nodes);

// mix * normalize(emissions[node]) + (1 - mix) * normalize(norms).
// `emissions` holds num_nodes rows of N nonnegative local weights; `norms`
// holds N nonnegative global weights (e.g. L1 norms of state embeddings).
// mix = 0.5 is the even local/global blend, 1 the local-only variant and 0
// the global-only variant.
Proposal local_global_proposal(std::span<const double> emissions,
                               std::span<const double> norms,
                               std::size_t num_nodes, double mix = 0.5);

// Proposal proportional to the true summands of the forward recursion. At
// step t < T the weight of state j is alpha_t(j) * sum_i phi_t(j, i); at the
// last step it is alpha_T(j). Requires the result of exact_forward on the
// same potentials.
Proposal oracle_proposal(const chain::ChainPotentials& potentials,
                         const chain::ForwardResult<double>& exact);

}  // namespace rdp::proposals
