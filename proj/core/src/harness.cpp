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

#include "rdpkit/harness.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "rdpkit/error.hpp"
#include "rdpkit/numerics.hpp"
#include "rdpkit/proposals.hpp"

namespace rdp::harness {

namespace {

template <class E, std::size_t M>
E parse_name(std::string_view s, const std::pair<std::string_view, E> (&table)[M],
             const char* what) {
  for (const auto& [key, value] : table) {
    if (key == s) return value;
  }
  std::string msg = std::string("unknown ") + what + " '" + std::string(s) + "' (expected";
  for (std::size_t i = 0; i < M; ++i) {
    msg += (i == 0 ? " " : ", ");
    msg += table[i].first;
  }
  throw ConfigError(msg + ")");
}

constexpr std::pair<std::string_view, ProfileKind> kProfiles[] = {
    {"dense", ProfileKind::kDense},
    {"intermediate", ProfileKind::kIntermediate},
    {"long-tail", ProfileKind::kLongTail}};
constexpr std::pair<std::string_view, ModelKind> kModels[] = {
    {"chain", ModelKind::kChain}, {"tree", ModelKind::kTree}};
constexpr std::pair<std::string_view, Quantity> kQuantities[] = {
    {"logz", Quantity::kLogZ}, {"entropy", Quantity::kEntropy}};
constexpr std::pair<std::string_view, ProposalKind> kProposals[] = {
    {"uniform", ProposalKind::kUniform},
    {"local", ProposalKind::kLocal},
    {"global", ProposalKind::kGlobal},
    {"local-global", ProposalKind::kLocalGlobal},
    {"oracle", ProposalKind::kOracle}};

template <class E, std::size_t M>
std::string_view lookup(E value, const std::pair<std::string_view, E> (&table)[M]) {
  for (const auto& [key, v] : table) {
    if (v == value) return key;
  }
  return "?";
}

double row_normalized_entropy(std::span<const double> logits) {
  const std::size_t n = logits.size();
  if (n <= 1) return 0.0;
  const double lz = logsumexp(logits);
  double h = 0.0;
  for (double x : logits) {
    const double lp = x - lz;
    if (lp > kNegInf) h -= std::exp(lp) * lp;
  }
  return h / std::log(static_cast<double>(n));
}

constexpr std::uint64_t kCalibrationSeed = 0x7e3a1c5b;
constexpr std::size_t kCalibrationCells = std::size_t{1} << 17;

// Runs fn(r) for r in [0, count) on up to `jobs` threads. Results must be
// written by index so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t r = 0; r < count; ++r) fn(r);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t r = w; r < count; r += jobs) fn(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_config(const EstimateConfig& c, std::size_t n) {
  if (c.runs == 0) throw ConfigError("runs must be positive");
  if (c.k1 > n) throw ConfigError("K1 must not exceed N");
  if (c.k1 + c.k2 == 0) throw ConfigError("K1 + K2 must be positive");
}

double standard_normal_logit(Rng& rng) { return rng.normal(); }

}  // namespace

std::string_view name(ProfileKind kind) { return lookup(kind, kProfiles); }
std::string_view name(ModelKind kind) { return lookup(kind, kModels); }
std::string_view name(Quantity kind) { return lookup(kind, kQuantities); }
std::string_view name(ProposalKind kind) { return lookup(kind, kProposals); }

ProfileKind parse_profile(std::string_view s) { return parse_name(s, kProfiles, "profile"); }
ModelKind parse_model(std::string_view s) { return parse_name(s, kModels, "model"); }
Quantity parse_quantity(std::string_view s) {
  return parse_name(s, kQuantities, "quantity");
}
ProposalKind parse_proposal(std::string_view s) {
  return parse_name(s, kProposals, "proposal");
}

double target_normalized_entropy(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kDense: return 0.9;
    case ProfileKind::kIntermediate: return 0.6;
    case ProfileKind::kLongTail: return 0.3;
  }
  return 0.9;
}

double mean_normalized_entropy(std::span<const double> logits, std::size_t n) {
  if (n == 0 || logits.size() % n != 0 || logits.empty()) {
    throw ConfigError("mean_normalized_entropy: logits must hold whole rows");
  }
  const std::size_t rows = logits.size() / n;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    total += row_normalized_entropy(logits.subspan(r * n, n));
  }
  return total / static_cast<double>(rows);
}

double calibrate_temperature(std::size_t n, double target) {
  if (n == 0) throw ConfigError("calibrate_temperature: N must be positive");
  if (!(target > 0.0 && target < 1.0)) {
    throw ConfigError("calibrate_temperature: target must lie in (0, 1)");
  }
  if (n == 1) return 1.0;

  static std::mutex mu;
  static std::map<std::pair<std::size_t, double>, double> cache;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find({n, target}); it != cache.end()) return it->second;
  }

  const std::size_t rows = std::max<std::size_t>(16, kCalibrationCells / n);
  std::vector<double> z(rows * n);
  Rng rng(kCalibrationSeed);
  for (double& x : z) x = rng.normal();

  std::vector<double> scaled(z.size());
  auto entropy_at = [&](double tau) {
    for (std::size_t i = 0; i < z.size(); ++i) scaled[i] = z[i] / tau;
    return mean_normalized_entropy(scaled, n);
  };
  double lo = std::log(1e-3);
  double hi = std::log(1e3);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (entropy_at(std::exp(mid)) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double tau = std::exp(0.5 * (lo + hi));
  std::lock_guard lock(mu);
  cache[{n, target}] = tau;
  return tau;
}

TailProfile calibrated_profile(ProfileKind kind, std::size_t n) {
  const double target = target_normalized_entropy(kind);
  return {kind, calibrate_temperature(n, target), target};
}

double mean_normalized_entropy(const chain::ChainPotentials& p) {
  chain::validate(p);
  if (p.length == 1) return mean_normalized_entropy(p.init, p.num_states);
  return mean_normalized_entropy(p.pairwise, p.num_states);
}

double mean_normalized_entropy(const tree::HypertreePotentials& p) {
  tree::validate(p);
  return mean_normalized_entropy(p.span_potentials, p.num_states);
}

SimulatedChain simulate_chain(std::size_t n, std::size_t length,
                              ProfileKind profile, std::uint64_t seed) {
  if (n == 0 || length == 0) throw ConfigError("simulate_chain: N and T must be positive");
  SimulatedChain sim;
  sim.profile = calibrated_profile(profile, n);
  const double tau = sim.profile.temperature;
  const double scale = 1.0 / (std::sqrt(3.0) * tau);

  Rng root(seed);
  Rng grng = root.split(0);
  Rng lrng = root.split(1);
  Rng erng = root.split(2);
  std::vector<double> g(n);
  for (double& x : g) x = standard_normal_logit(grng);
  std::vector<double> l(length * n);
  for (double& x : l) x = standard_normal_logit(lrng);

  auto& p = sim.potentials;
  p = chain::ChainPotentials(length, n);
  for (std::size_t i = 0; i < n; ++i) {
    p.init[i] = (g[i] + l[i] + erng.normal()) * scale;
  }
  for (std::size_t t = 0; t + 1 < length; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        p.pair(t, j, i) = (g[i] + l[(t + 1) * n + i] + erng.normal()) * scale;
      }
    }
  }
  sim.local_weights.resize(length * n);
  for (std::size_t k = 0; k < l.size(); ++k) {
    sim.local_weights[k] = std::exp((g[k % n] + l[k]) * scale);
  }
  sim.global_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) sim.global_weights[i] = std::exp(g[i] * scale);
  sim.normalized_entropy = mean_normalized_entropy(p);
  return sim;
}

SimulatedTree simulate_tree(std::size_t n, std::size_t length,
                            ProfileKind profile, std::uint64_t seed) {
  if (n == 0 || length == 0) throw ConfigError("simulate_tree: N and T must be positive");
  SimulatedTree sim;
  sim.profile = calibrated_profile(profile, n);
  const double scale = 1.0 / (std::sqrt(2.0) * sim.profile.temperature);
  Rng root(seed);
  Rng grng = root.split(0);
  Rng erng = root.split(1);
  std::vector<double> g(n);
  for (double& x : g) x = grng.normal();
  sim.potentials = tree::HypertreePotentials(length, n);
  auto& phi = sim.potentials.span_potentials;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    phi[k] = (g[k % n] + erng.normal()) * scale;
  }
  sim.normalized_entropy = mean_normalized_entropy(sim.potentials);
  return sim;
}

double tail_sum_estimate(std::span<const double> a, std::size_t k1,
                         std::size_t k2, std::span<const double> tail_q,
                         Rng& rng) {
  if (k1 > a.size()) throw ConfigError("tail_sum_estimate: K1 exceeds the input size");
  if (tail_q.size() != a.size() - k1) {
    throw ConfigError("tail_sum_estimate: tail proposal must cover the N - K1 tail");
  }
  double head = 0.0;
  for (std::size_t i = 0; i < k1; ++i) head += a[i];
  if (k2 == 0) return head;
  if (tail_q.empty()) throw DegenerateTailError();

  std::vector<double> cdf(tail_q.size());
  double total = 0.0;
  for (std::size_t i = 0; i < tail_q.size(); ++i) {
    if (!(tail_q[i] >= 0.0)) throw ConfigError("tail_sum_estimate: negative proposal");
    total += tail_q[i];
    cdf[i] = total;
  }
  if (!(total > 0.0)) throw DegenerateTailError();
  double acc = 0.0;
  for (std::size_t s = 0; s < k2; ++s) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    auto d = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    while (tail_q[d] == 0.0 && d > 0) --d;
    acc += a[k1 + d] / (tail_q[d] / total);
  }
  return head + acc / static_cast<double>(k2);
}

double analytic_tail_variance(std::span<const double> a, std::size_t k1,
                              std::span<const double> tail_q, std::size_t k2) {
  if (k1 > a.size()) throw ConfigError("analytic_tail_variance: K1 exceeds the input size");
  if (tail_q.size() != a.size() - k1) {
    throw ConfigError("analytic_tail_variance: tail proposal must cover the N - K1 tail");
  }
  if (k2 == 0) return 0.0;
  double total_q = 0.0;
  for (double q : tail_q) total_q += q;
  double second = 0.0;
  double first = 0.0;
  for (std::size_t i = 0; i < tail_q.size(); ++i) {
    const double ai = a[k1 + i];
    first += ai;
    if (ai == 0.0) continue;
    if (!(tail_q[i] > 0.0)) {
      throw ConfigError("analytic_tail_variance: proposal misses a nonzero term");
    }
    second += ai * ai / (tail_q[i] / total_q);
  }
  return std::max(0.0, second - first * first) / static_cast<double>(k2);
}

EstimateReport summarize(double exact, std::vector<double> replicates,
                         const EstimateConfig& config) {
  if (replicates.empty()) throw ConfigError("summarize: no replicates");
  EstimateReport rep;
  rep.exact = exact;
  rep.config = config;
  const double count = static_cast<double>(replicates.size());
  double mean = 0.0;
  for (double x : replicates) mean += x;
  mean /= count;
  double var = 0.0;
  for (double x : replicates) var += (x - mean) * (x - mean);
  var /= count;
  rep.mean = mean;
  rep.bias = mean - exact;
  rep.variance = var;
  rep.mse = rep.bias * rep.bias + var;
  rep.replicates = std::move(replicates);
  return rep;
}

Proposal make_proposal(const SimulatedChain& sim, ProposalKind kind) {
  const auto& p = sim.potentials;
  switch (kind) {
    case ProposalKind::kUniform:
      return proposals::uniform_proposal(p.num_states, p.length);
    case ProposalKind::kLocal:
      return proposals::local_global_proposal(sim.local_weights, sim.global_weights,
                                              p.length, 1.0);
    case ProposalKind::kGlobal:
      return proposals::local_global_proposal(sim.local_weights, sim.global_weights,
                                              p.length, 0.0);
    case ProposalKind::kLocalGlobal:
      return proposals::local_global_proposal(sim.local_weights, sim.global_weights,
                                              p.length, 0.5);
    case ProposalKind::kOracle:
      return proposals::oracle_proposal(p, chain::exact_forward(p));
  }
  throw ConfigError("unknown proposal");
}

namespace {

void guard_chain(const chain::ChainPotentials& p) {
  const double n = static_cast<double>(p.num_states);
  if (static_cast<double>(p.length) * n * n > kChainExactLimit) {
    throw GuardError("exact reference needs T * N^2 <= " +
                     std::to_string(static_cast<long long>(kChainExactLimit)) +
                     "; reduce N or T");
  }
}

}  // namespace

EstimateReport evaluate(const SimulatedChain& sim, Quantity quantity,
                        const EstimateConfig& config) {
  const auto& p = sim.potentials;
  check_config(config, p.num_states);
  guard_chain(p);
  const double exact = quantity == Quantity::kLogZ ? chain::exact_forward(p).log_z
                                                   : chain::exact_entropy(p);
  const Proposal q = make_proposal(sim, config.proposal);
  const Rng root(config.seed);
  std::vector<double> reps(config.runs);
  parallel_for(config.runs, config.jobs, [&](std::size_t r) {
    const auto sel = Selection::from_proposal(q, config.k1, config.k2, root.split(r));
    const auto fwd = chain::randomized_forward(p, sel);
    reps[r] = quantity == Quantity::kLogZ ? fwd.log_z
                                          : chain::randomized_entropy(p, sel, fwd);
  });
  return summarize(exact, std::move(reps), config);
}

EstimateReport evaluate(const SimulatedTree& sim, const EstimateConfig& config) {
  const auto& p = sim.potentials;
  check_config(config, p.num_states);
  if (config.proposal != ProposalKind::kUniform) {
    throw ConfigError("tree estimates support only the uniform proposal");
  }
  if (p.num_states > kTreeExactStates) {
    throw GuardError("exact tree reference needs N <= " +
                     std::to_string(kTreeExactStates) + "; reduce N");
  }
  const double exact = tree::exact_inside(p).log_z;
  const Proposal q =
      proposals::uniform_proposal(p.num_states, tree::num_spans(p.length));
  const Rng root(config.seed);
  std::vector<double> reps(config.runs);
  parallel_for(config.runs, config.jobs, [&](std::size_t r) {
    const auto sel = Selection::from_proposal(q, config.k1, config.k2, root.split(r));
    reps[r] = tree::randomized_inside(p, sel, config.blocks).log_z;
  });
  return summarize(exact, std::move(reps), config);
}

std::size_t randomized_tape_nodes(const SimulatedChain& sim, Quantity quantity,
                                  const EstimateConfig& config) {
  check_config(config, sim.potentials.num_states);
  const Proposal q = make_proposal(sim, config.proposal);
  const auto sel = Selection::from_proposal(q, config.k1, config.k2, Rng(config.seed));
  ad::Tape tape;
  const auto vp = chain::attach(tape, sim.potentials, &sel);
  const std::size_t before = tape.size();
  const auto fwd = chain::randomized_forward(vp, sel);
  if (quantity == Quantity::kEntropy) (void)chain::randomized_entropy(vp, sel, fwd);
  return tape.size() - before;
}

}  // namespace rdp::harness
