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

#include "rdpkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "rdpkit/error.hpp"
#include "rdpkit/numerics.hpp"
#include "rdpkit/proposals.hpp"

namespace rdp::train {

namespace {

double dot_row(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

ad::Var dot_row(std::span<const ad::Var> a, std::span<const ad::Var> b) {
  return ad::dot(a, b);
}

std::vector<ad::Var> leaves(ad::Tape& tape, const std::vector<double>& values) {
  std::vector<ad::Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(tape.variable(v));
  return out;
}

void descend(std::vector<double>& values, const std::vector<ad::Var>& vars,
             const ad::Tape& tape, double step) {
  for (std::size_t k = 0; k < values.size(); ++k) values[k] -= step * tape.adjoint(vars[k]);
}

void check_sequences(const std::vector<std::vector<int>>& data, std::size_t length,
                     std::size_t n, const char* what) {
  if (data.empty()) throw ConfigError(std::string(what) + ": no sequences");
  for (const auto& x : data) {
    if (x.size() != length) {
      throw ConfigError(std::string(what) + ": every sequence must have length " +
                        std::to_string(length));
    }
    for (int s : x) {
      if (s < 0 || static_cast<std::size_t>(s) >= n) {
        throw ConfigError(std::string(what) + ": symbol out of range");
      }
    }
  }
}

int draw_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(weights.size() - 1);
}

}  // namespace

void validate(const EmbeddingParams& params) {
  if (params.num_states == 0 || params.dim == 0 || params.length == 0) {
    throw ConfigError("embedding params: N, d and T must be positive");
  }
  if (params.state_embeddings.size() != params.num_states * params.dim) {
    throw ConfigError("embedding params: state embeddings must hold N * d values");
  }
  if (params.context_features.size() != params.length * params.dim) {
    throw ConfigError("embedding params: context features must hold T * d values");
  }
  for (double v : params.state_embeddings) {
    if (!std::isfinite(v)) throw ConfigError("embedding params: non-finite embedding");
  }
  for (double v : params.context_features) {
    if (!std::isfinite(v)) throw ConfigError("embedding params: non-finite context");
  }
}

EmbeddingParams random_embeddings(std::size_t n, std::size_t dim, std::size_t length,
                                  std::uint64_t seed, double scale) {
  EmbeddingParams p;
  p.num_states = n;
  p.dim = dim;
  p.length = length;
  Rng rng(seed);
  Rng erng = rng.split(0);
  Rng rrng = rng.split(1);
  p.state_embeddings.resize(n * dim);
  for (double& v : p.state_embeddings) v = scale * erng.normal();
  p.context_features.resize(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    double norm = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = rrng.normal();
      p.context_features[t * dim + k] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < dim; ++k) {
      p.context_features[t * dim + k] = norm > 0.0 ? p.context_features[t * dim + k] / norm
                                                   : (k == 0 ? 1.0 : 0.0);
    }
  }
  validate(p);
  return p;
}

template <class S>
chain::BasicChainPotentials<S> build_potentials(std::span<const S> states,
                                                std::span<const S> contexts,
                                                std::size_t n, std::size_t dim,
                                                const Selection* mask) {
  if (n == 0 || dim == 0) throw ConfigError("build_potentials: N and d must be positive");
  if (states.size() != n * dim) {
    throw ConfigError("build_potentials: state embeddings must hold N * d values");
  }
  if (contexts.empty() || contexts.size() % dim != 0) {
    throw ConfigError("build_potentials: context features must hold T * d values");
  }
  const std::size_t length = contexts.size() / dim;
  if (mask && (mask->num_nodes() != length || mask->num_states() != n)) {
    throw ConfigError("build_potentials: mask shape does not match");
  }
  auto e = [&](std::size_t i) { return states.subspan(i * dim, dim); };
  auto r = [&](std::size_t t) { return contexts.subspan(t * dim, dim); };

  chain::BasicChainPotentials<S> p(length, n);
  // Emission terms e_i . r_t, computed once per active (t, i).
  std::vector<std::vector<S>> emit(length, std::vector<S>(n, S(0.0)));
  std::vector<std::vector<int>> active(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (mask) {
      for (const auto& a : mask->active(t)) active[t].push_back(a.state);
    } else {
      active[t].resize(n);
      for (std::size_t i = 0; i < n; ++i) active[t][i] = static_cast<int>(i);
    }
    for (int i : active[t]) emit[t][i] = dot_row(e(i), r(t));
  }
  for (int i : active[0]) p.init[i] = emit[0][i];
  for (std::size_t t = 0; t + 1 < length; ++t) {
    for (int j : active[t]) {
      for (int i : active[t + 1]) p.pair(t, j, i) = dot_row(e(j), e(i)) + emit[t + 1][i];
    }
  }
  return p;
}

template chain::BasicChainPotentials<double> build_potentials(
    std::span<const double>, std::span<const double>, std::size_t, std::size_t,
    const Selection*);
template chain::BasicChainPotentials<ad::Var> build_potentials(
    std::span<const ad::Var>, std::span<const ad::Var>, std::size_t, std::size_t,
    const Selection*);

chain::ChainPotentials build_potentials(const EmbeddingParams& params) {
  validate(params);
  return build_potentials<double>(params.state_embeddings, params.context_features,
                                  params.num_states, params.dim);
}

EmbeddingParams calibrated_embeddings(std::size_t n, std::size_t dim, std::size_t length,
                                      std::uint64_t seed, double target) {
  if (!(target > 0.0 && target < 1.0)) {
    throw ConfigError("calibrated_embeddings: target must lie in (0, 1)");
  }
  if (n < 2) throw ConfigError("calibrated_embeddings: needs N >= 2");
  const EmbeddingParams unit = random_embeddings(n, dim, length, seed, 1.0);
  const double max_entropy = static_cast<double>(length) * std::log(static_cast<double>(n));
  EmbeddingParams p = unit;
  auto entropy_at = [&](double scale) {
    for (std::size_t k = 0; k < p.state_embeddings.size(); ++k) {
      p.state_embeddings[k] = scale * unit.state_embeddings[k];
    }
    return chain::exact_entropy(build_potentials(p)) / max_entropy;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (entropy_at(hi) > target) {
    hi *= 2.0;
    if (hi > 1e3) throw NumericalError("calibrated_embeddings: target entropy unreachable");
  }
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (entropy_at(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  entropy_at(0.5 * (lo + hi));
  return p;
}

Proposal embedding_proposal(std::span<const double> states,
                            std::span<const double> contexts, std::size_t n,
                            std::size_t dim) {
  if (n == 0 || dim == 0 || states.size() != n * dim || contexts.size() % dim != 0) {
    throw ConfigError("embedding_proposal: shape mismatch");
  }
  const std::size_t length = contexts.size() / dim;
  std::vector<double> local(length * n);
  std::vector<double> norms(n);
  for (std::size_t t = 0; t < length; ++t) {
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = dot_row(states.subspan(i * dim, dim), contexts.subspan(t * dim, dim));
    }
    const double lz = logsumexp(logits);
    for (std::size_t i = 0; i < n; ++i) local[t * n + i] = std::exp(logits[i] - lz);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double l1 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) l1 += std::abs(states[i * dim + k]);
    norms[i] = l1;
  }
  double total = 0.0;
  for (double v : norms) total += v;
  if (!(total > 0.0)) std::fill(norms.begin(), norms.end(), 1.0);
  return proposals::local_global_proposal(local, norms, length, 0.5);
}

double sequence_score(const EmbeddingParams& params, std::span<const int> path) {
  validate(params);
  if (path.size() != params.length) throw ConfigError("sequence_score: wrong path length");
  const auto p = build_potentials(params);
  return chain::path_score(p, path);
}

namespace {

// score(x) = sum_t e_{x_t} . r_t + sum_t e_{x_t} . e_{x_{t+1}}, on the tape.
ad::Var tape_score(std::span<const ad::Var> e, std::span<const ad::Var> r,
                   std::size_t dim, std::span<const int> x) {
  std::vector<ad::Var> terms;
  terms.reserve(2 * x.size());
  auto row = [&](std::span<const ad::Var> m, std::size_t i) { return m.subspan(i * dim, dim); };
  for (std::size_t t = 0; t < x.size(); ++t) {
    terms.push_back(ad::dot(row(e, x[t]), row(r, t)));
    if (t + 1 < x.size()) terms.push_back(ad::dot(row(e, x[t]), row(e, x[t + 1])));
  }
  return ad::sum(terms);
}

double exact_nll(const EmbeddingParams& params,
                 const std::vector<std::vector<int>>& data) {
  const auto p = build_potentials(params);
  const double log_z = chain::exact_forward(p).log_z;
  double score = 0.0;
  for (const auto& x : data) score += chain::path_score(p, std::span<const int>(x));
  return (log_z - score / static_cast<double>(data.size())) /
         static_cast<double>(params.length);
}

}  // namespace

std::vector<std::vector<int>> sample_sequences(const EmbeddingParams& params,
                                               std::size_t count, std::uint64_t seed) {
  const auto p = build_potentials(params);
  const auto full = Selection::full(p.length, p.num_states);
  const auto fwd = chain::randomized_forward(p, full);
  std::vector<std::vector<int>> out;
  out.reserve(count);
  const Rng root(seed);
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng = root.split(s);
    const auto noise = gumbel_noise(rng, p.length * p.num_states);
    out.push_back(chain::gumbel_backward_sample(p, full, fwd, noise).hard);
  }
  return out;
}

std::string_view name(Estimator e) {
  switch (e) {
    case Estimator::kExact: return "exact";
    case Estimator::kRdp: return "rdp";
    case Estimator::kTopK: return "topk";
  }
  return "?";
}

Estimator parse_estimator(std::string_view s) {
  if (s == "exact") return Estimator::kExact;
  if (s == "rdp") return Estimator::kRdp;
  if (s == "topk") return Estimator::kTopK;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected exact, rdp, topk)");
}

FitResult fit_marginal_likelihood(const std::vector<std::vector<int>>& data,
                                  EmbeddingParams init, const FitConfig& config) {
  validate(init);
  const std::size_t n = init.num_states;
  const std::size_t dim = init.dim;
  check_sequences(data, init.length, n, "fit_marginal_likelihood");
  if (n > kExactTrainStates) {
    throw GuardError("exact NLL evaluation needs N <= " + std::to_string(kExactTrainStates) +
                     "; reduce N");
  }
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  std::size_t k1 = config.k1;
  std::size_t k2 = config.k2;
  if (config.estimator == Estimator::kTopK) k2 = 0;
  if (config.estimator != Estimator::kExact) {
    if (k1 > n) throw ConfigError("K1 must not exceed N");
    if (k1 + k2 == 0) throw ConfigError("K1 + K2 must be positive");
  }

  FitResult result;
  result.params = std::move(init);
  auto& params = result.params;
  result.nll.push_back(exact_nll(params, data));

  const Rng root(config.seed);
  ad::Tape tape;
  const double inv_m = 1.0 / static_cast<double>(data.size());
  const double inv_t = 1.0 / static_cast<double>(params.length);
  for (std::size_t step = 0; step < config.steps; ++step) {
    tape.clear();
    const auto e = leaves(tape, params.state_embeddings);
    const std::vector<ad::Var> r(params.context_features.begin(),
                                 params.context_features.end());
    ad::Var log_z;
    if (config.estimator == Estimator::kExact) {
      log_z = chain::exact_forward(build_potentials<ad::Var>(e, r, n, dim)).log_z;
    } else {
      const auto q = embedding_proposal(params.state_embeddings, params.context_features, n, dim);
      const auto sel = Selection::from_proposal(q, k1, k2, root.split(step));
      log_z = chain::randomized_forward(build_potentials<ad::Var>(e, r, n, dim, &sel), sel)
                  .log_z;
    }
    std::vector<ad::Var> scores;
    scores.reserve(data.size());
    for (const auto& x : data) scores.push_back(tape_score(e, r, dim, x));
    const ad::Var loss = (log_z - ad::sum(scores) * inv_m) * inv_t;
    result.peak_tape_nodes = std::max(result.peak_tape_nodes, tape.size());
    tape.backward(loss);
    descend(params.state_embeddings, e, tape, config.learning_rate);

    const bool finite = std::all_of(params.state_embeddings.begin(),
                                    params.state_embeddings.end(),
                                    [](double v) { return std::isfinite(v); });
    const double nll = finite ? exact_nll(params, data) : kNegInf;
    if (!std::isfinite(nll)) {
      throw NumericalError("training diverged at step " + std::to_string(step + 1) + " (" +
                           (finite ? "NLL = " + std::to_string(nll)
                                   : std::string("non-finite embeddings")) +
                           "); lower the learning rate");
    }
    result.nll.push_back(nll);
  }
  return result;
}

SymbolData make_symbol_data(std::size_t num_symbols, std::size_t length,
                            std::size_t count, std::uint64_t seed) {
  if (num_symbols == 0 || length == 0 || count == 0) {
    throw ConfigError("make_symbol_data: sizes must be positive");
  }
  Rng rng(seed);
  Rng trng = rng.split(0);
  std::vector<double> zipf(num_symbols);
  for (std::size_t v = 0; v < num_symbols; ++v) zipf[v] = 1.0 / static_cast<double>(v + 1);
  std::vector<double> trans(num_symbols * num_symbols);
  for (std::size_t a = 0; a < num_symbols; ++a) {
    for (std::size_t b = 0; b < num_symbols; ++b) {
      trans[a * num_symbols + b] = zipf[b] * std::exp(trng.normal());
    }
  }
  SymbolData data;
  data.num_symbols = num_symbols;
  data.length = length;
  for (std::size_t s = 0; s < count; ++s) {
    Rng srng = rng.split(1 + s);
    std::vector<int> y(length);
    y[0] = draw_categorical(zipf, srng);
    for (std::size_t t = 1; t < length; ++t) {
      y[t] = draw_categorical(
          std::span<const double>(trans).subspan(static_cast<std::size_t>(y[t - 1]) * num_symbols,
                                                 num_symbols),
          srng);
    }
    data.sequences.push_back(std::move(y));
  }
  return data;
}

namespace {

struct AutoencoderModel {
  std::size_t n, v, dim;
  std::vector<double> states;   // N x d
  std::vector<double> symbols;  // V x d
  std::vector<double> decoder;  // N x V
};

template <class S>
std::vector<S> contexts_for(const std::vector<S>& symbols, std::span<const int> y,
                            std::size_t dim) {
  std::vector<S> r;
  r.reserve(y.size() * dim);
  for (int s : y) {
    for (std::size_t k = 0; k < dim; ++k) r.push_back(symbols[s * dim + k]);
  }
  return r;
}

}  // namespace

AutoencoderResult fit_toy_autoencoder(const SymbolData& data,
                                      const AutoencoderConfig& config) {
  const std::size_t n = config.num_states;
  const std::size_t v = data.num_symbols;
  const std::size_t dim = config.dim;
  const std::size_t length = data.length;
  if (n == 0 || dim == 0) throw ConfigError("autoencoder: N and d must be positive");
  check_sequences(data.sequences, length, v, "fit_toy_autoencoder");
  if (config.k1 > n) throw ConfigError("K1 must not exceed N");
  if (config.k1 + config.k2 == 0) throw ConfigError("K1 + K2 must be positive");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(config.temperature > 0.0)) throw ConfigError("temperature must be positive");

  AutoencoderModel m{n, v, dim, {}, {}, std::vector<double>(n * v, 0.0)};
  {
    Rng rng = Rng(config.seed).split(0x5eed);
    m.states.resize(n * dim);
    for (double& x : m.states) x = 0.5 * rng.normal();
    m.symbols.resize(v * dim);
    for (double& x : m.symbols) x = 0.5 * rng.normal();
  }
  const double log_prior = -static_cast<double>(length) * std::log(static_cast<double>(n));
  const std::size_t items = data.sequences.size();
  const double inv_m = 1.0 / static_cast<double>(items);

  AutoencoderResult result;
  const Rng root(config.seed);
  ad::Tape tape;
  for (std::size_t step = 0; step < config.steps; ++step) {
    tape.clear();
    const auto e = leaves(tape, m.states);
    const auto u = leaves(tape, m.symbols);
    const auto w = leaves(tape, m.decoder);
    std::vector<ad::Var> objectives;
    objectives.reserve(items);
    for (std::size_t item = 0; item < items; ++item) {
      const auto& y = data.sequences[item];
      const Rng base = root.split(step).split(item);
      const auto r = contexts_for(u, y, dim);
      const auto r_values = contexts_for(m.symbols, y, dim);
      const auto q = embedding_proposal(m.states, r_values, n, dim);
      const auto sel = Selection::from_proposal(q, config.k1, config.k2, base.split(0));
      const auto p = build_potentials<ad::Var>(e, r, n, dim, &sel);
      const auto fwd = chain::randomized_forward(p, sel);
      const ad::Var entropy = chain::randomized_entropy(p, sel, fwd);
      Rng nrng = base.split(1);
      const auto noise = gumbel_noise(nrng, length * n);
      const auto sample = chain::gumbel_backward_sample(p, sel, fwd, noise, config.temperature,
                                                      config.gumbel);

      std::vector<ad::Var> terms;
      terms.reserve(length + 1);
      for (std::size_t t = 0; t < length; ++t) {
        const auto& support = sample.support[t];
        std::vector<ad::Var> mix(support.size());
        for (std::size_t a = 0; a < support.size(); ++a) {
          mix[a] = sample.soft[t][a];
          if (config.straight_through) {
            const double hard = support[a] == sample.hard[t] ? 1.0 : 0.0;
            mix[a] = mix[a] + ad::Var(hard - mix[a].value());
          }
        }
        std::vector<ad::Var> logits(v);
        std::vector<ad::Var> column(support.size());
        for (std::size_t s = 0; s < v; ++s) {
          for (std::size_t a = 0; a < support.size(); ++a) {
            column[a] = w[static_cast<std::size_t>(support[a]) * v + s];
          }
          logits[s] = ad::dot(mix, column);
        }
        terms.push_back(logits[y[t]] - ad::logsumexp(logits));
      }
      terms.push_back(entropy);
      objectives.push_back(ad::sum(terms));
    }
    const ad::Var elbo = ad::sum(objectives) * inv_m + ad::Var(log_prior);
    result.peak_tape_nodes = std::max(result.peak_tape_nodes, tape.size());
    if (!std::isfinite(elbo.value())) {
      throw NumericalError("autoencoder diverged at step " + std::to_string(step + 1) +
                           "; lower the learning rate");
    }
    result.elbo.push_back(elbo.value());
    tape.backward(elbo);
    descend(m.states, e, tape, -config.learning_rate);
    descend(m.symbols, u, tape, -config.learning_rate);
    descend(m.decoder, w, tape, -config.learning_rate);
  }

  result.histogram.assign(n, 0);
  const std::size_t draws = std::max<std::size_t>(1, config.histogram_samples);
  for (std::size_t item = 0; item < items; ++item) {
    const auto& y = data.sequences[item];
    const auto r = contexts_for(m.symbols, y, dim);
    const auto q = embedding_proposal(m.states, r, n, dim);
    for (std::size_t d = 0; d < draws; ++d) {
      const Rng base = root.split(config.steps).split(item).split(d);
      const auto sel = Selection::from_proposal(q, config.k1, config.k2, base.split(0));
      const auto p = build_potentials<double>(m.states, r, n, dim, &sel);
      const auto fwd = chain::randomized_forward(p, sel);
      Rng nrng = base.split(1);
      const auto noise = gumbel_noise(nrng, length * n);
      const auto sample =
          chain::gumbel_backward_sample(p, sel, fwd, noise, config.temperature, config.gumbel);
      for (int s : sample.hard) ++result.histogram[s];
    }
  }
  std::vector<std::size_t> sorted = result.histogram;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t head =
      config.head_states > 0 ? std::min(config.head_states, n) : (n + 9) / 10;
  std::size_t total = 0;
  std::size_t head_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += sorted[i];
    if (i < head) head_count += sorted[i];
    if (sorted[i] == 0) ++result.never_used;
  }
  result.tail_mass =
      total > 0 ? 1.0 - static_cast<double>(head_count) / static_cast<double>(total) : 0.0;
  return result;
}

}  // namespace rdp::train
