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

#include "rdpkit/selection.hpp"

#include <cmath>
#include <cstring>
#include <map>

#include "rdpkit/error.hpp"

namespace rdp {
namespace {

// FNV-1a over the bytes of a value.
class Fingerprint {
 public:
  template <class T>
  void add(const T& value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (unsigned char b : bytes) {
      hash_ ^= b;
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::vector<ActiveEntry> build_active(const NodeSelection& node,
                                      std::size_t k2) {
  std::vector<ActiveEntry> active;
  active.reserve(node.topk.size() + node.sampled.size());
  for (int s : node.topk) active.push_back({s, 0.0, false});
  // Duplicate draws of one state collapse into a single slot whose weight is
  // count / (K2 * q~).
  std::map<int, std::size_t> slot;
  std::vector<double> counts;
  std::vector<double> probs;
  for (const TailDraw& d : node.sampled) {
    auto [it, inserted] = slot.try_emplace(d.index, counts.size());
    if (inserted) {
      active.push_back({d.index, 0.0, true});
      counts.push_back(0.0);
      probs.push_back(d.tail_prob);
    }
    counts[it->second] += 1.0;
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    active[node.topk.size() + c].log_weight =
        std::log(counts[c] / (static_cast<double>(k2) * probs[c]));
  }
  return active;
}

}  // namespace

Proposal::Proposal(std::size_t num_nodes, std::size_t num_states,
                   std::vector<double> weights)
    : num_nodes_(num_nodes), num_states_(num_states), weights_(std::move(weights)) {
  if (num_states_ == 0) throw ConfigError("proposal: N must be positive");
  if (weights_.size() != num_nodes_ * num_states_) {
    throw ConfigError("proposal: weight table has the wrong shape");
  }
  for (std::size_t n = 0; n < num_nodes_; ++n) {
    double total = 0.0;
    double* row = weights_.data() + n * num_states_;
    for (std::size_t i = 0; i < num_states_; ++i) {
      if (!(row[i] >= 0.0) || std::isinf(row[i])) {
        throw ConfigError("proposal: weights must be finite and nonnegative");
      }
      total += row[i];
    }
    if (!(total > 0.0)) throw ConfigError("proposal: a node has zero total weight");
    for (std::size_t i = 0; i < num_states_; ++i) row[i] /= total;
  }
}

Selection::Selection(std::size_t num_states, std::size_t k1, std::size_t k2,
                     std::vector<NodeSelection> nodes)
    : num_states_(num_states), k1_(k1), k2_(k2), nodes_(std::move(nodes)) {
  Fingerprint fp;
  fp.add(num_states_);
  fp.add(k1_);
  fp.add(k2_);
  fp.add(nodes_.size());
  for (NodeSelection& node : nodes_) {
    for (int s : node.topk) {
      if (s < 0 || static_cast<std::size_t>(s) >= num_states_) {
        throw ConfigError("selection: top-K index out of range");
      }
    }
    for (const TailDraw& d : node.sampled) {
      if (d.index < 0 || static_cast<std::size_t>(d.index) >= num_states_) {
        throw ConfigError("selection: sampled index out of range");
      }
      if (!(d.tail_prob > 0.0 && d.tail_prob <= 1.0)) {
        throw ConfigError("selection: tail probability outside (0, 1]");
      }
    }
    if (!node.sampled.empty() && k2_ == 0) {
      throw ConfigError("selection: sampled indices with K2 = 0");
    }
    node.active = build_active(node, k2_);
    if (node.active.empty()) throw ConfigError("selection: empty active set");
    fp.add(node.topk.size());
    for (int s : node.topk) fp.add(s);
    fp.add(node.sampled.size());
    for (const TailDraw& d : node.sampled) {
      fp.add(d.index);
      fp.add(d.tail_prob);
    }
  }
  fingerprint_ = fp.value();
}

Selection Selection::full(std::size_t num_nodes, std::size_t num_states) {
  NodeSelection node;
  node.topk.resize(num_states);
  for (std::size_t i = 0; i < num_states; ++i) node.topk[i] = static_cast<int>(i);
  Selection s(num_states, num_states, 0,
              std::vector<NodeSelection>(num_nodes, node));
  s.full_ = true;
  return s;
}

Selection Selection::from_proposal(const Proposal& proposal, std::size_t k1,
                                   std::size_t k2, const Rng& rng) {
  const std::size_t n = proposal.num_states();
  if (k1 > n) throw ConfigError("selection: K1 exceeds N");
  if (k1 + k2 == 0) throw ConfigError("selection: K1 + K2 must be positive");
  std::vector<NodeSelection> nodes(proposal.num_nodes());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto weights = proposal.node(i);
    nodes[i].topk = topk_indices(weights, k1);
    if (k2 > 0 && k1 < n) {
      Rng stream = rng.split(i);
      try {
        nodes[i].sampled = sample_tail(weights, nodes[i].topk, k2, stream);
      } catch (const DegenerateTailError&) {
        nodes[i].sampled.clear();
      }
    }
  }
  return Selection(n, k1, k2, std::move(nodes));
}

int Selection::position(std::size_t i, int state) const {
  const auto& active = nodes_[i].active;
  for (std::size_t p = 0; p < active.size(); ++p) {
    if (active[p].state == state) return static_cast<int>(p);
  }
  return -1;
}

}  // namespace rdp
