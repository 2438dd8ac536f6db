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

#include "rdpkit/chain.hpp"

#include <cmath>
#include <string>

#include "rdpkit/error.hpp"
#include "scalar_ops.hpp"

namespace rdp::chain {
namespace {

using ad::primal;
using rdp::primal;
using std::exp;

template <class S>
void check_shape(const BasicChainPotentials<S>& p) {
  if (p.length == 0 || p.num_states == 0) {
    throw ConfigError("chain potentials: T and N must be positive");
  }
  if (p.init.size() != p.num_states ||
      p.pairwise.size() != (p.length - 1) * p.num_states * p.num_states) {
    throw ConfigError("chain potentials: tables have the wrong shape");
  }
}

template <class S>
void check_selection(const BasicChainPotentials<S>& p, const Selection& sel) {
  if (sel.num_nodes() != p.length || sel.num_states() != p.num_states) {
    throw ConfigError("selection shape mismatch: expected " +
                      std::to_string(p.length) + " steps over " +
                      std::to_string(p.num_states) + " states");
  }
}

template <class S>
void check_forward(const Selection& sel, const ForwardResult<S>& fwd) {
  if (fwd.fingerprint != sel.fingerprint() ||
      fwd.alpha.size() != sel.num_nodes()) {
    throw ConfigError(
        "selection does not match the one used by randomized_forward");
  }
}

// Alpha of each active state at `step`, times its selection multiplier.
template <class S>
void weighted_sources(std::span<const ActiveEntry> active,
                      const std::vector<S>& alpha, std::vector<S>& out) {
  out.clear();
  out.reserve(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (active[k].log_weight == 0.0) {
      out.push_back(alpha[k]);
    } else {
      out.push_back(alpha[k] + S(active[k].log_weight));
    }
  }
}

template <class S>
ForwardResult<S> forward_impl(const BasicChainPotentials<S>& p,
                              const Selection& sel, bool exact) {
  check_shape(p);
  check_selection(p, sel);
  const std::size_t steps = p.length;
  ForwardResult<S> r;
  r.fingerprint = sel.fingerprint();
  r.alpha.resize(steps);

  for (const ActiveEntry& e : sel.active(0)) {
    r.alpha[0].push_back(p.init[static_cast<std::size_t>(e.state)]);
  }
  auto unreachable = [&](std::size_t t) {
    for (const S& a : r.alpha[t]) {
      if (primal(a) != kNegInf) return false;
    }
    return true;
  };
  if (exact && unreachable(0)) throw NumericalError("unreachable step 1");

  std::vector<S> sources;
  std::vector<S> terms;
  for (std::size_t t = 1; t < steps; ++t) {
    const auto prev = sel.active(t - 1);
    const auto cur = sel.active(t);
    weighted_sources(prev, r.alpha[t - 1], sources);
    r.alpha[t].reserve(cur.size());
    for (const ActiveEntry& c : cur) {
      terms.clear();
      for (std::size_t k = 0; k < prev.size(); ++k) {
        terms.push_back(sources[k] +
                        p.pair(t - 1, static_cast<std::size_t>(prev[k].state),
                               static_cast<std::size_t>(c.state)));
      }
      r.alpha[t].push_back(logsumexp(std::span<const S>(terms)));
    }
    if (exact && unreachable(t)) {
      throw NumericalError("unreachable step " + std::to_string(t + 1));
    }
  }
  weighted_sources(sel.active(steps - 1), r.alpha[steps - 1], sources);
  r.log_z = logsumexp(std::span<const S>(sources));
  return r;
}

// -log p * p weighted by the selection multiplier, accumulated with the
// entropy carried in from the predecessor state.
template <class S>
void entropy_term(const S& log_p, double log_weight, const S& carried,
                  std::vector<S>& terms) {
  if (primal(log_p) == kNegInf) return;
  const S floored = clamp_below(log_p, std::log(kEntropyProbFloor));
  const S scaled =
      log_weight == 0.0 ? exp(floored) : exp(floored + S(log_weight));
  terms.push_back(scaled * (carried - floored));
}

template <class S>
S sum_or_zero(const std::vector<S>& terms) {
  if (terms.empty()) return S(0.0);
  return sum(std::span<const S>(terms));
}

}  // namespace

void validate(const ChainPotentials& p) {
  check_shape(p);
  auto ok = [](double v) { return !std::isnan(v) && v != HUGE_VAL; };
  for (double v : p.init) {
    if (!ok(v)) throw ConfigError("chain potentials: NaN or +inf entry");
  }
  for (double v : p.pairwise) {
    if (!ok(v)) throw ConfigError("chain potentials: NaN or +inf entry");
  }
}

TapeChainPotentials attach(ad::Tape& tape, const ChainPotentials& p,
                           const Selection* mask) {
  check_shape(p);
  TapeChainPotentials out;
  out.length = p.length;
  out.num_states = p.num_states;
  if (mask == nullptr) {
    out.init.reserve(p.init.size());
    for (double v : p.init) out.init.push_back(tape.variable(v));
    out.pairwise.reserve(p.pairwise.size());
    for (double v : p.pairwise) out.pairwise.push_back(tape.variable(v));
    return out;
  }
  check_selection(p, *mask);
  out.init.assign(p.init.begin(), p.init.end());
  out.pairwise.assign(p.pairwise.begin(), p.pairwise.end());
  for (const ActiveEntry& e : mask->active(0)) {
    const auto s = static_cast<std::size_t>(e.state);
    out.init[s] = tape.variable(p.init[s]);
  }
  for (std::size_t t = 0; t + 1 < p.length; ++t) {
    for (const ActiveEntry& from : mask->active(t)) {
      for (const ActiveEntry& to : mask->active(t + 1)) {
        const auto f = static_cast<std::size_t>(from.state);
        const auto g = static_cast<std::size_t>(to.state);
        out.pair(t, f, g) = tape.variable(p.pair(t, f, g));
      }
    }
  }
  return out;
}

template <class S>
ForwardResult<S> exact_forward(const BasicChainPotentials<S>& p) {
  check_shape(p);
  return forward_impl(p, Selection::full(p.length, p.num_states), true);
}

template <class S>
ForwardResult<S> randomized_forward(const BasicChainPotentials<S>& p,
                                    const Selection& selection) {
  return forward_impl(p, selection, false);
}

template <class S>
S randomized_entropy(const BasicChainPotentials<S>& p,
                     const Selection& selection,
                     const ForwardResult<S>& forward) {
  check_shape(p);
  check_selection(p, selection);
  check_forward(selection, forward);
  const std::size_t steps = p.length;

  // carried[k]: entropy of the prefix ending in active state k of step t.
  std::vector<S> carried(selection.active(0).size(), S(0.0));
  std::vector<S> next;
  std::vector<S> terms;
  for (std::size_t t = 0; t + 1 < steps; ++t) {
    const auto prev = selection.active(t);
    const auto cur = selection.active(t + 1);
    next.clear();
    next.reserve(cur.size());
    for (std::size_t c = 0; c < cur.size(); ++c) {
      const S& alpha_next = forward.alpha[t + 1][c];
      terms.clear();
      if (primal(alpha_next) != kNegInf) {
        for (std::size_t k = 0; k < prev.size(); ++k) {
          const S log_p =
              forward.alpha[t][k] +
              p.pair(t, static_cast<std::size_t>(prev[k].state),
                     static_cast<std::size_t>(cur[c].state)) -
              alpha_next;
          entropy_term(log_p, prev[k].log_weight, carried[k], terms);
        }
      }
      next.push_back(sum_or_zero(terms));
    }
    carried.swap(next);
  }

  const auto last = selection.active(steps - 1);
  terms.clear();
  if (primal(forward.log_z) != kNegInf) {
    for (std::size_t k = 0; k < last.size(); ++k) {
      const S log_p = forward.alpha[steps - 1][k] - forward.log_z;
      entropy_term(log_p, last[k].log_weight, carried[k], terms);
    }
  }
  return sum_or_zero(terms);
}

template <class S>
S exact_entropy(const BasicChainPotentials<S>& p) {
  const Selection full = Selection::full(p.length, p.num_states);
  return randomized_entropy(p, full, forward_impl(p, full, true));
}

template <class S>
GumbelSample<S> gumbel_backward_sample(const BasicChainPotentials<S>& p,
                                       const Selection& selection,
                                       const ForwardResult<S>& forward,
                                       std::span<const double> noise,
                                       double temperature, GumbelLogits mode) {
  check_shape(p);
  check_selection(p, selection);
  check_forward(selection, forward);
  if (!(temperature > 0.0)) {
    throw ConfigError("gumbel_backward_sample: temperature must be positive");
  }
  const std::size_t steps = p.length;
  const std::size_t n = p.num_states;
  if (noise.size() != steps * n) {
    throw ConfigError("gumbel_backward_sample: noise must hold T * N values");
  }

  GumbelSample<S> out;
  out.support.resize(steps);
  out.soft.resize(steps);
  out.hard.assign(steps, 0);

  std::vector<S> logits;
  std::vector<S> scaled;
  const bool weighted = mode == GumbelLogits::kImportanceWeighted;
  auto weight = [&](const ActiveEntry& a) { return weighted ? a.log_weight : 0.0; };
  const double inv_temp = 1.0 / temperature;
  // Relaxed sample over the active set; returns the argmax position.
  auto relax = [&](std::size_t t) {
    const auto active = selection.active(t);
    scaled.clear();
    int best = -1;
    double best_value = kNegInf;
    for (std::size_t k = 0; k < active.size(); ++k) {
      out.support[t].push_back(active[k].state);
      const double v = primal(logits[k]);
      if (v > best_value) {
        best_value = v;
        best = static_cast<int>(k);
      }
      scaled.push_back(inv_temp == 1.0 ? logits[k] : logits[k] * S(inv_temp));
    }
    if (best < 0) throw NumericalError("gumbel_backward_sample: no feasible state");
    const S norm = logsumexp(std::span<const S>(scaled));
    for (const S& s : scaled) out.soft[t].push_back(exp(s - norm));
    out.hard[t] = active[static_cast<std::size_t>(best)].state;
    return best;
  };

  const auto last = selection.active(steps - 1);
  logits.clear();
  for (std::size_t k = 0; k < last.size(); ++k) {
    const auto s = static_cast<std::size_t>(last[k].state);
    logits.push_back(forward.alpha[steps - 1][k] - forward.log_z +
                     S(weight(last[k]) + noise[(steps - 1) * n + s]));
  }
  int pos = relax(steps - 1);

  for (std::size_t t = steps - 1; t-- > 0;) {
    const auto active = selection.active(t);
    const auto next_state = static_cast<std::size_t>(out.hard[t + 1]);
    const S& alpha_next = forward.alpha[t + 1][static_cast<std::size_t>(pos)];
    logits.clear();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto s = static_cast<std::size_t>(active[k].state);
      logits.push_back(forward.alpha[t][k] + p.pair(t, s, next_state) -
                       alpha_next +
                       S(weight(active[k]) + noise[t * n + s]));
    }
    pos = relax(t);
  }
  return out;
}

template <class S>
S path_score(const BasicChainPotentials<S>& p, std::span<const int> path) {
  check_shape(p);
  if (path.size() != p.length) throw ConfigError("path_score: wrong path length");
  S score = p.init[static_cast<std::size_t>(path[0])];
  for (std::size_t t = 0; t + 1 < p.length; ++t) {
    score = score + p.pair(t, static_cast<std::size_t>(path[t]),
                           static_cast<std::size_t>(path[t + 1]));
  }
  return score;
}

BruteForceChain brute_force_chain(const ChainPotentials& p) {
  validate(p);
  const double count =
      std::pow(static_cast<double>(p.num_states), static_cast<double>(p.length));
  if (count > kBruteForceLimit) {
    throw GuardError("brute_force_chain: N^T exceeds 1e6 paths");
  }
  BruteForceChain out;
  std::vector<int> path(p.length, 0);
  std::vector<double> scores;
  const auto total = static_cast<std::size_t>(count);
  out.paths.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t t = p.length; t-- > 0;) {
      path[t] = static_cast<int>(rest % p.num_states);
      rest /= p.num_states;
    }
    out.paths.push_back(path);
    scores.push_back(path_score(p, std::span<const int>(path)));
  }
  out.log_z = logsumexp(scores);
  if (out.log_z == kNegInf) throw NumericalError("brute_force_chain: Z = 0");
  out.posterior.reserve(total);
  for (double s : scores) {
    const double prob = std::exp(s - out.log_z);
    out.posterior.push_back(prob);
    if (prob > 0.0) out.entropy -= prob * (s - out.log_z);
  }
  return out;
}

template ForwardResult<double> exact_forward(const ChainPotentials&);
template ForwardResult<ad::Var> exact_forward(const TapeChainPotentials&);
template ForwardResult<double> randomized_forward(const ChainPotentials&,
                                                  const Selection&);
template ForwardResult<ad::Var> randomized_forward(const TapeChainPotentials&,
                                                   const Selection&);
template double exact_entropy(const ChainPotentials&);
template ad::Var exact_entropy(const TapeChainPotentials&);
template double randomized_entropy(const ChainPotentials&, const Selection&,
                                   const ForwardResult<double>&);
template ad::Var randomized_entropy(const TapeChainPotentials&,
                                    const Selection&,
                                    const ForwardResult<ad::Var>&);
template GumbelSample<double> gumbel_backward_sample(
    const ChainPotentials&, const Selection&, const ForwardResult<double>&,
    std::span<const double>, double, GumbelLogits);
template GumbelSample<ad::Var> gumbel_backward_sample(
    const TapeChainPotentials&, const Selection&, const ForwardResult<ad::Var>&,
    std::span<const double>, double, GumbelLogits);
template double path_score(const ChainPotentials&, std::span<const int>);
template ad::Var path_score(const TapeChainPotentials&, std::span<const int>);

}  // namespace rdp::chain
