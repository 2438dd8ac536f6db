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
#include <string_view>
#include <vector>

#include "rdpkit/autodiff.hpp"
#include "rdpkit/chain.hpp"
#include "rdpkit/selection.hpp"

namespace rdp::train {

// State embeddings e_i (N x d, row-major) and per-position context features
// r_t (T x d).
struct EmbeddingParams {
  std::size_t num_states = 0;
  std::size_t dim = 0;
  std::size_t length = 0;
  std::vector<double> state_embeddings;
  std::vector<double> context_features;
};

void validate(const EmbeddingParams& params);

// Embeddings ~ scale * N(0, 1); contexts are random unit vectors.
EmbeddingParams random_embeddings(std::size_t n, std::size_t dim, std::size_t length,
                                  std::uint64_t seed, double scale = 1.0);

// init[i] = e_i . r_0 and pair(t, j, i) = e_j . e_i + e_i . r_{t+1}. With a
// mask, entries between states that are not both active stay zero constants.
template <class S>
chain::BasicChainPotentials<S> build_potentials(std::span<const S> states,
                                                std::span<const S> contexts,
                                                std::size_t n, std::size_t dim,
                                                const Selection* mask = nullptr);

chain::ChainPotentials build_potentials(const EmbeddingParams& params);

// Random embeddings rescaled so the chain entropy divided by T log N equals
// `target` (within 1e-3). Contexts and directions come from `seed`.
EmbeddingParams calibrated_embeddings(std::size_t n, std::size_t dim, std::size_t length,
                                      std::uint64_t seed, double target);

// Mixture of local weights exp(e_i . r_t) and global weights ||e_i||_1.
Proposal embedding_proposal(std::span<const double> states,
                            std::span<const double> contexts, std::size_t n,
                            std::size_t dim);

double sequence_score(const EmbeddingParams& params, std::span<const int> path);

// Exact samples from the chain defined by `params`.
std::vector<std::vector<int>> sample_sequences(const EmbeddingParams& params,
                                               std::size_t count, std::uint64_t seed);

enum class Estimator { kExact, kRdp, kTopK };

std::string_view name(Estimator e);
Estimator parse_estimator(std::string_view s);

struct FitConfig {
  Estimator estimator = Estimator::kRdp;
  std::size_t k1 = 0;
  std::size_t k2 = 1;
  std::size_t steps = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct FitResult {
  // Exact NLL per token (mean over sequences, divided by T) before training
  // and after every step.
  std::vector<double> nll;
  EmbeddingParams params;
  std::size_t peak_tape_nodes = 0;
};

inline constexpr std::size_t kExactTrainStates = 200;

// Fits the state embeddings of `init` to fully observed state sequences by
// gradient descent on (logZ - score) / T. Only the logZ gradient depends on the
// estimator; the reported NLL is always exact.
FitResult fit_marginal_likelihood(const std::vector<std::vector<int>>& data,
                                  EmbeddingParams init, const FitConfig& config);

struct SymbolData {
  std::size_t num_symbols = 0;
  std::size_t length = 0;
  std::vector<std::vector<int>> sequences;
};

// Symbol sequences from a Markov chain with a Zipf-like stationary profile.
SymbolData make_symbol_data(std::size_t num_symbols, std::size_t length,
                            std::size_t count, std::uint64_t seed);

struct AutoencoderConfig {
  std::size_t num_states = 40;
  std::size_t dim = 8;
  std::size_t k1 = 4;
  std::size_t k2 = 4;
  std::size_t steps = 60;
  double learning_rate = 0.05;
  double temperature = 1.0;
  // Decode the hard sample while back-propagating through the relaxed one.
  bool straight_through = false;
  chain::GumbelLogits gumbel = chain::GumbelLogits::kImportanceWeighted;
  // Hard samples drawn per training item for the aggregated posterior.
  std::size_t histogram_samples = 16;
  // States outside the this many most frequent ones count as tail; 0 means
  // ceil(N / 10).
  std::size_t head_states = 0;
  std::uint64_t seed = 0;
};

struct AutoencoderResult {
  // Mean ELBO estimate per sequence at every step.
  std::vector<double> elbo;
  // Latent state frequencies of hard samples over all training items.
  std::vector<std::size_t> histogram;
  std::size_t never_used = 0;
  double tail_mass = 0.0;
  std::size_t peak_tape_nodes = 0;
};

// Encoder: CRF over latent states with potentials from state embeddings and
// learned symbol embeddings. Decoder: per-state categorical table fed the
// Gumbel relaxed sample as a convex mixture of rows. Objective: decoded
// log-likelihood of the sample plus the estimated encoder entropy, uniform
// prior.
AutoencoderResult fit_toy_autoencoder(const SymbolData& data,
                                      const AutoencoderConfig& config);

extern template chain::BasicChainPotentials<double> build_potentials(
    std::span<const double>, std::span<const double>, std::size_t, std::size_t,
    const Selection*);
extern template chain::BasicChainPotentials<ad::Var> build_potentials(
    std::span<const ad::Var>, std::span<const ad::Var>, std::size_t, std::size_t,
    const Selection*);

}  // namespace rdp::train
