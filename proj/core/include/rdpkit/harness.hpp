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
#include <string>
#include <string_view>
#include <vector>

#include "rdpkit/chain.hpp"
#include "rdpkit/hypertree.hpp"
#include "rdpkit/rng.hpp"
#include "rdpkit/selection.hpp"

namespace rdp::harness {

enum class ProfileKind { kDense, kIntermediate, kLongTail };
enum class ModelKind { kChain, kTree };
enum class Quantity { kLogZ, kEntropy };
enum class ProposalKind { kUniform, kLocal, kGlobal, kLocalGlobal, kOracle };

std::string_view name(ProfileKind kind);
std::string_view name(ModelKind kind);
std::string_view name(Quantity kind);
std::string_view name(ProposalKind kind);
// Accept the names above (dense, long-tail, local-global, ...); throw
// ConfigError otherwise.
ProfileKind parse_profile(std::string_view s);
ModelKind parse_model(std::string_view s);
Quantity parse_quantity(std::string_view s);
ProposalKind parse_proposal(std::string_view s);

// Target mean normalized entropy of the per-node conditional distributions:
// 0.9 dense, 0.6 intermediate, 0.3 long-tail.
double target_normalized_entropy(ProfileKind kind);

struct TailProfile {
  ProfileKind kind = ProfileKind::kDense;
  double temperature = 1.0;
  double target_entropy = 0.9;
};

// Temperature tau such that softmax(z / tau), z ~ N(0, I_N), has mean
// normalized entropy `target`. Deterministic in (n, target).
double calibrate_temperature(std::size_t n, double target);
TailProfile calibrated_profile(ProfileKind kind, std::size_t n);

// Mean over rows of H(softmax(row)) / log N; 0 when N = 1.
double mean_normalized_entropy(std::span<const double> logits, std::size_t n);
double mean_normalized_entropy(const chain::ChainPotentials& p);
double mean_normalized_entropy(const tree::HypertreePotentials& p);

struct SimulatedChain {
  chain::ChainPotentials potentials;
  // Per-step unary weights exp((g(i) + l_t(i)) / (sqrt(3) tau)) (T x N) and
  // per-state global weights exp(g(i) / (sqrt(3) tau)) (N); the ingredients
  // of the local / global proposals.
  std::vector<double> local_weights;
  std::vector<double> global_weights;
  TailProfile profile;
  double normalized_entropy = 0.0;
};

// Log-potentials are standard-normal logits over temperature. Each logit is
// (g(i) + l_t(i) + e_t(j, i)) / sqrt(3) with independent standard normal
// global, local and pairwise parts, so it is marginally N(0, 1) while the
// global and local parts give proposals something to correlate with.
SimulatedChain simulate_chain(std::size_t n, std::size_t length,
                              ProfileKind profile, std::uint64_t seed);

struct SimulatedTree {
  tree::HypertreePotentials potentials;
  TailProfile profile;
  double normalized_entropy = 0.0;
};

SimulatedTree simulate_tree(std::size_t n, std::size_t length,
                            ProfileKind profile, std::uint64_t seed);

// Sum-and-sample estimate of sum(a): the first k1 entries exactly plus the
// mean of k2 importance-weighted draws a_d / q_d, d ~ q over the remaining
// entries. `a` is sorted descending; `tail_q` has a.size() - k1 entries.
double tail_sum_estimate(std::span<const double> a, std::size_t k1,
                         std::size_t k2, std::span<const double> tail_q,
                         Rng& rng);

// sum_{i > k1} a_i^2 / q_i - (sum_{i > k1} a_i)^2, divided by k2.
double analytic_tail_variance(std::span<const double> a, std::size_t k1,
                              std::span<const double> tail_q,
                              std::size_t k2 = 1);

struct EstimateConfig {
  std::size_t k1 = 0;
  std::size_t k2 = 1;
  ProposalKind proposal = ProposalKind::kUniform;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  tree::InsideBlocks blocks = tree::InsideBlocks::kFullCross;
};

struct EstimateReport {
  double exact = 0.0;
  std::vector<double> replicates;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  EstimateConfig config;
};

// Exact references are capped: chain T * N^2 <= kChainExactLimit, tree
// N <= kTreeExactStates.
inline constexpr double kChainExactLimit = 2e8;
inline constexpr std::size_t kTreeExactStates = 300;

Proposal make_proposal(const SimulatedChain& sim, ProposalKind kind);

EstimateReport evaluate(const SimulatedChain& sim, Quantity quantity,
                        const EstimateConfig& config);
EstimateReport evaluate(const SimulatedTree& sim, const EstimateConfig& config);

// Summary statistics of replicates against an exact value.
EstimateReport summarize(double exact, std::vector<double> replicates,
                         const EstimateConfig& config);

// Tape nodes recorded by one randomized replicate (selection drawn with
// `config.seed`), potentials attached only where the selection reaches.
std::size_t randomized_tape_nodes(const SimulatedChain& sim, Quantity quantity,
                                  const EstimateConfig& config);

}  // namespace rdp::harness
