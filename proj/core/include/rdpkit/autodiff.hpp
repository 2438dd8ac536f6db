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
#include <functional>
#include <span>
#include <vector>

namespace rdp::ad {

class Tape;

// Handle to a scalar on a Tape, or a constant when it is not attached to any
// tape. Constants participate in arithmetic but record nothing, so selection
// weights and other non-differentiated inputs never grow the tape.
class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit by design of the scalar API

  double value() const { return value_; }
  bool is_constant() const { return tape_ == nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id, double value)
      : tape_(tape), id_(id), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
  double value_ = 0.0;
};

inline double primal(const Var& x) { return x.value(); }

// Append-only reverse-mode tape. Every node stores its primal value and the
// local partials to its parents; backward() walks ids in decreasing order,
// which is a reverse topological order because parents always precede
// children.
class Tape {
 public:
  struct Edge {
    const Var* parent;
    double partial;
  };

  Tape() { edge_end_.push_back(0); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(double value);

  // Records a node with the given parents. Constant parents are skipped.
  // Returns a constant when every parent is constant.
  Var record(double value, std::span<const Edge> parents);
  Var record(double value, std::initializer_list<Edge> parents) {
    return record(value, std::span<const Edge>(parents.begin(), parents.size()));
  }

  std::size_t size() const { return primal_.size(); }

  // Seeds d(output)/d(output) = 1 and accumulates adjoints for every node at
  // or before `output`. Throws if called twice without zero_adjoints().
  void backward(const Var& output);

  // Adjoint after backward(); 0 for constants and unreached nodes.
  double adjoint(const Var& v) const;

  void zero_adjoints();
  void clear();

 private:
  std::vector<double> primal_;
  std::vector<double> adjoint_;
  std::vector<std::uint32_t> edge_end_;
  std::vector<std::uint32_t> edge_parent_;
  std::vector<double> edge_partial_;
  bool backward_done_ = false;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
// Throws rdp::NumericalError on a zero divisor.
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

// Throws rdp::NumericalError on a nonpositive argument.
Var log(const Var& x);
Var exp(const Var& x);
// max(x, floor): passes the gradient through only when x is above the floor.
Var clamp_below(const Var& x, double floor);

// Fused n-ary reductions; one node each.
Var logsumexp(std::span<const Var> xs);
Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);

using ScalarFunction = std::function<Var(std::span<const Var>)>;

// Central finite differences against tape adjoints at `point`. Returns
// max_i |fd_i - ad_i| / max(1, |ad_i|).
double gradcheck(const ScalarFunction& f, std::span<const double> point,
                 double eps = 1e-6);

// Adjoints of f at `point`, one per coordinate.
std::vector<double> gradient(const ScalarFunction& f,
                             std::span<const double> point);

}  // namespace rdp::ad
