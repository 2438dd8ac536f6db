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

#include "rdpkit/proposals.hpp"

#include <cmath>
#include <vector>

#include "rdpkit/error.hpp"

namespace rdp::proposals {

Proposal uniform_proposal(std::size_t num_states, std::size_t num_nodes) {
  if (num_states == 0) throw ConfigError("uniform_proposal: N must be positive");
  return Proposal(num_nodes, num_states,
                  std::vector<double>(num_nodes * num_states,
                                      1.0 / static_cast<double>(num_states)));
}

Proposal local_global_proposal(std::span<const double> emissions,
                               std::span<const double> norms,
                               std::size_t num_nodes, double mix) {
  const std::size_t n = norms.size();
  if (n == 0) throw ConfigError("local_global_proposal: N must be positive");
  if (emissions.size() != num_nodes * n) {
    throw ConfigError("local_global_proposal: emissions must hold nodes * N values");
  }
  if (!(mix >= 0.0 && mix <= 1.0)) {
    throw ConfigError("local_global_proposal: mix must lie in [0, 1]");
  }
  auto total_of = [](std::span<const double> xs, const char* what) {
    double total = 0.0;
    for (double x : xs) {
      if (!(x >= 0.0) || std::isinf(x)) {
        throw ConfigError(std::string("local_global_proposal: ") + what +
                          " must be finite and nonnegative");
      }
      total += x;
    }
    return total;
  };
  const double norm_total = total_of(norms, "norms");
  if (mix < 1.0 && !(norm_total > 0.0)) {
    throw ConfigError("local_global_proposal: norms sum to zero");
  }
  std::vector<double> weights(num_nodes * n);
  for (std::size_t t = 0; t < num_nodes; ++t) {
    const auto row = emissions.subspan(t * n, n);
    const double local_total = total_of(row, "emissions");
    if (mix > 0.0 && !(local_total > 0.0)) {
      throw ConfigError("local_global_proposal: emissions sum to zero");
    }
    for (std::size_t i = 0; i < n; ++i) {
      double w = 0.0;
      if (mix > 0.0) w += mix * row[i] / local_total;
      if (mix < 1.0) w += (1.0 - mix) * norms[i] / norm_total;
      weights[t * n + i] = w;
    }
  }
  return Proposal(num_nodes, n, std::move(weights));
}

Proposal oracle_proposal(const chain::ChainPotentials& potentials,
                         const chain::ForwardResult<double>& exact) {
  chain::validate(potentials);
  const std::size_t steps = potentials.length;
  const std::size_t n = potentials.num_states;
  if (exact.alpha.size() != steps) {
    throw ConfigError("oracle_proposal: forward result has the wrong length");
  }
  for (const auto& a : exact.alpha) {
    if (a.size() != n) {
      throw ConfigError("oracle_proposal: needs the full alpha table of exact_forward");
    }
  }
  std::vector<double> weights(steps * n);
  std::vector<double> logs(n);
  std::vector<double> outgoing(n);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double log_mass = 0.0;
      if (t + 1 < steps) {
        for (std::size_t i = 0; i < n; ++i) outgoing[i] = potentials.pair(t, j, i);
        log_mass = logsumexp(outgoing);
      }
      logs[j] = exact.alpha[t][j] + log_mass;
    }
    const double norm = logsumexp(logs);
    if (norm == kNegInf) throw NumericalError("oracle_proposal: degenerate step");
    for (std::size_t j = 0; j < n; ++j) weights[t * n + j] = std::exp(logs[j] - norm);
  }
  return Proposal(steps, n, std::move(weights));
}

}  // namespace rdp::proposals
