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
#include <vector>

#include "rdpkit/numerics.hpp"
#include "rdpkit/rng.hpp"

namespace rdp {

// Per-node categorical weights over N states. Rows are nonnegative and sum
// to one.
class Proposal {
 public:
  Proposal() = default;
  // Normalizes every row; throws ConfigError on a negative entry or a row
  // with zero total.
  Proposal(std::size_t num_nodes, std::size_t num_states,
           std::vector<double> weights);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_states() const { return num_states_; }
  std::span<const double> node(std::size_t i) const {
    return {weights_.data() + i * num_states_, num_states_};
  }

 private:
  std::size_t num_nodes_ = 0;
  std::size_t num_states_ = 0;
  std::vector<double> weights_;
};

// One summand slot of a restricted recursion: a state and the log of the
// multiplier applied to its term. Top-K1 states carry log 1 = 0; a sampled
// state drawn c times carries log(c / (K2 * q~)).
struct ActiveEntry {
  int state = 0;
  double log_weight = 0.0;
  bool sampled = false;
};

struct NodeSelection {
  std::vector<int> topk;
  std::vector<TailDraw> sampled;
  // Distinct states of topk followed by distinct sampled states, in first
  // appearance order.
  std::vector<ActiveEntry> active;
};

// Index selection for every node of a DP graph: steps of a chain, or spans of
// a hypertree (keyed by span index). Immutable after construction.
class Selection {
 public:
  Selection(std::size_t num_states, std::size_t k1, std::size_t k2,
            std::vector<NodeSelection> nodes);

  // Every state as top-K1 with K2 = 0; reproduces the exact recursion.
  static Selection full(std::size_t num_nodes, std::size_t num_states);

  // Top-k1 by proposal weight plus k2 tail draws per node. Node i draws from
  // rng.split(i), so the result does not depend on traversal order. A node
  // whose tail has no mass gets no samples.
  static Selection from_proposal(const Proposal& proposal, std::size_t k1,
                                 std::size_t k2, const Rng& rng);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_states() const { return num_states_; }
  std::size_t k1() const { return k1_; }
  std::size_t k2() const { return k2_; }
  const NodeSelection& node(std::size_t i) const { return nodes_[i]; }
  std::span<const ActiveEntry> active(std::size_t i) const {
    return nodes_[i].active;
  }
  // Position of `state` in active(i), or -1.
  int position(std::size_t i, int state) const;
  std::uint64_t fingerprint() const { return fingerprint_; }
  bool is_full() const { return full_; }

 private:
  std::size_t num_states_;
  std::size_t k1_;
  std::size_t k2_;
  std::vector<NodeSelection> nodes_;
  std::uint64_t fingerprint_ = 0;
  bool full_ = false;
};

using IndexSelection = Selection;
using SpanSelection = Selection;

}  // namespace rdp
