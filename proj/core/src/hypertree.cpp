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

#include "rdpkit/hypertree.hpp"

#include <cmath>
#include <string>

#include "rdpkit/error.hpp"

namespace rdp::tree {
namespace {

using ad::primal;
using rdp::primal;

template <class S>
void check_shape(const BasicHypertreePotentials<S>& p) {
  if (p.length == 0 || p.num_states == 0) {
    throw ConfigError("hypertree potentials: T and N must be positive");
  }
  if (p.span_potentials.size() != num_spans(p.length) * p.num_states) {
    throw ConfigError("hypertree potentials: table has the wrong shape");
  }
}

template <class S>
InsideResult<S> inside_impl(const BasicHypertreePotentials<S>& p,
                            const Selection& sel, InsideBlocks blocks,
                            bool exact) {
  check_shape(p);
  const std::size_t len = p.length;
  if (sel.num_nodes() != num_spans(len) || sel.num_states() != p.num_states) {
    throw ConfigError("selection shape mismatch: expected " +
                      std::to_string(num_spans(len)) + " spans over " +
                      std::to_string(p.num_states) + " states");
  }
  InsideResult<S> r;
  r.fingerprint = sel.fingerprint();
  r.inside.resize(num_spans(len));
  // Inside value times selection multiplier, per active slot.
  std::vector<std::vector<S>> weighted(num_spans(len));
  auto finish_span = [&](std::size_t idx) {
    const auto active = sel.active(idx);
    weighted[idx].reserve(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const S& v = r.inside[idx][k];
      weighted[idx].push_back(active[k].log_weight == 0.0
                                  ? v
                                  : v + S(active[k].log_weight));
    }
  };

  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t idx = span_index(i, i, len);
    for (const ActiveEntry& e : sel.active(idx)) {
      r.inside[idx].push_back(p.at(i, i, static_cast<std::size_t>(e.state)));
    }
    finish_span(idx);
  }

  std::vector<S> terms;
  for (std::size_t width = 1; width < len; ++width) {
    for (std::size_t i = 0; i + width < len; ++i) {
      const std::size_t j = i + width;
      const std::size_t idx = span_index(i, j, len);
      terms.clear();
      for (std::size_t m = i; m < j; ++m) {
        const std::size_t left = span_index(i, m, len);
        const std::size_t right = span_index(m + 1, j, len);
        const auto la = sel.active(left);
        const auto ra = sel.active(right);
        for (std::size_t a = 0; a < la.size(); ++a) {
          for (std::size_t b = 0; b < ra.size(); ++b) {
            if (blocks == InsideBlocks::kTwoBlock &&
                la[a].sampled != ra[b].sampled) {
              continue;
            }
            terms.push_back(weighted[left][a] + weighted[right][b]);
          }
        }
      }
      const S children =
          terms.empty() ? S(kNegInf) : logsumexp(std::span<const S>(terms));
      for (const ActiveEntry& e : sel.active(idx)) {
        r.inside[idx].push_back(children +
                                p.at(i, j, static_cast<std::size_t>(e.state)));
      }
      finish_span(idx);
    }
  }
  const std::size_t root = span_index(0, len - 1, len);
  r.log_z = logsumexp(std::span<const S>(weighted[root]));
  if (exact && primal(r.log_z) == kNegInf) {
    throw NumericalError("unreachable root");
  }
  return r;
}

// All binary bracketings of [i, j] as lists of spans.
std::vector<std::vector<std::pair<int, int>>> bracketings(int i, int j) {
  if (i == j) return {{{i, i}}};
  std::vector<std::vector<std::pair<int, int>>> out;
  for (int m = i; m < j; ++m) {
    const auto left = bracketings(i, m);
    const auto right = bracketings(m + 1, j);
    for (const auto& l : left) {
      for (const auto& r : right) {
        std::vector<std::pair<int, int>> tree{{i, j}};
        tree.insert(tree.end(), l.begin(), l.end());
        tree.insert(tree.end(), r.begin(), r.end());
        out.push_back(std::move(tree));
      }
    }
  }
  return out;
}

}  // namespace

void validate(const HypertreePotentials& p) {
  check_shape(p);
  for (double v : p.span_potentials) {
    if (std::isnan(v) || v == HUGE_VAL) {
      throw ConfigError("hypertree potentials: NaN or +inf entry");
    }
  }
}

TapeHypertreePotentials attach(ad::Tape& tape, const HypertreePotentials& p) {
  check_shape(p);
  TapeHypertreePotentials out;
  out.length = p.length;
  out.num_states = p.num_states;
  out.span_potentials.reserve(p.span_potentials.size());
  for (double v : p.span_potentials) out.span_potentials.push_back(tape.variable(v));
  return out;
}

template <class S>
InsideResult<S> exact_inside(const BasicHypertreePotentials<S>& p) {
  check_shape(p);
  return inside_impl(p, Selection::full(num_spans(p.length), p.num_states),
                     InsideBlocks::kFullCross, true);
}

template <class S>
InsideResult<S> randomized_inside(const BasicHypertreePotentials<S>& p,
                                  const Selection& selection,
                                  InsideBlocks blocks) {
  return inside_impl(p, selection, blocks, false);
}

BruteForceTrees brute_force_trees(const HypertreePotentials& p) {
  validate(p);
  const int len = static_cast<int>(p.length);
  const double nodes = 2.0 * len - 1.0;
  // Catalan(T - 1) via the product formula.
  double catalan = 1.0;
  for (int k = 2; k <= len - 1; ++k) catalan *= (len - 1.0 + k) / k;
  const double labelings = std::pow(static_cast<double>(p.num_states), nodes);
  if (catalan * labelings > kBruteForceLimit) {
    throw GuardError("brute_force_trees: Catalan(T-1) * N^(2T-1) exceeds 1e6");
  }
  BruteForceTrees out;
  std::vector<double> scores;
  const auto total_labels = static_cast<std::size_t>(labelings);
  for (const auto& spans : bracketings(0, len - 1)) {
    std::vector<int> labels(spans.size(), 0);
    for (std::size_t code = 0; code < total_labels; ++code) {
      std::size_t rest = code;
      double score = 0.0;
      for (std::size_t s = 0; s < spans.size(); ++s) {
        labels[s] = static_cast<int>(rest % p.num_states);
        rest /= p.num_states;
        score += p.at(static_cast<std::size_t>(spans[s].first),
                      static_cast<std::size_t>(spans[s].second),
                      static_cast<std::size_t>(labels[s]));
      }
      out.trees.push_back({spans, labels, score, 0.0});
      scores.push_back(score);
    }
  }
  out.log_z = logsumexp(scores);
  if (out.log_z == kNegInf) throw NumericalError("brute_force_trees: Z = 0");
  for (LabeledTree& t : out.trees) {
    t.probability = std::exp(t.log_weight - out.log_z);
  }
  return out;
}

template InsideResult<double> exact_inside(const HypertreePotentials&);
template InsideResult<ad::Var> exact_inside(const TapeHypertreePotentials&);
template InsideResult<double> randomized_inside(const HypertreePotentials&,
                                                const Selection&, InsideBlocks);
template InsideResult<ad::Var> randomized_inside(const TapeHypertreePotentials&,
                                                 const Selection&,
                                                 InsideBlocks);

}  // namespace rdp::tree
