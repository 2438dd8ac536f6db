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

#include "rdpkit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rdpkit/error.hpp"

namespace rdp::ad {
namespace {

Tape* common_tape(std::span<const Var> xs) {
  Tape* tape = nullptr;
  for (const Var& x : xs) {
    if (x.is_constant()) continue;
    if (tape != nullptr && tape != x.tape()) {
      throw Error("autodiff: operands live on different tapes");
    }
    tape = x.tape();
  }
  return tape;
}

Tape* common_tape(const Var& a, const Var& b) {
  if (a.is_constant()) return b.tape();
  if (b.is_constant() || a.tape() == b.tape()) return a.tape();
  throw Error("autodiff: operands live on different tapes");
}

}  // namespace

Var Tape::variable(double value) {
  backward_done_ = false;
  const auto id = static_cast<std::uint32_t>(primal_.size());
  primal_.push_back(value);
  edge_end_.push_back(edge_end_.back());
  return Var(this, id, value);
}

Var Tape::record(double value, std::span<const Edge> parents) {
  const auto id = static_cast<std::uint32_t>(primal_.size());
  bool any = false;
  for (const Edge& e : parents) {
    if (e.parent->is_constant()) continue;
    edge_parent_.push_back(e.parent->id());
    edge_partial_.push_back(e.partial);
    any = true;
  }
  if (!any) return Var(value);
  backward_done_ = false;
  primal_.push_back(value);
  edge_end_.push_back(static_cast<std::uint32_t>(edge_parent_.size()));
  return Var(this, id, value);
}

void Tape::backward(const Var& output) {
  if (output.is_constant()) return;
  if (output.tape() != this) throw Error("backward: output is on another tape");
  if (backward_done_) {
    throw Error("backward: adjoints already computed; call zero_adjoints()");
  }
  adjoint_.assign(primal_.size(), 0.0);
  adjoint_[output.id()] = 1.0;
  for (std::size_t n = output.id() + 1; n-- > 0;) {
    const double a = adjoint_[n];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_end_[n]; e < edge_end_[n + 1]; ++e) {
      adjoint_[edge_parent_[e]] += a * edge_partial_[e];
    }
  }
  backward_done_ = true;
}

double Tape::adjoint(const Var& v) const {
  if (v.is_constant() || v.id() >= adjoint_.size()) return 0.0;
  return adjoint_[v.id()];
}

void Tape::zero_adjoints() {
  adjoint_.clear();
  backward_done_ = false;
}

void Tape::clear() {
  primal_.clear();
  adjoint_.clear();
  edge_end_.assign(1, 0);
  edge_parent_.clear();
  edge_partial_.clear();
  backward_done_ = false;
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() + b.value();
  if (t == nullptr) return Var(v);
  return t->record(v, {{&a, 1.0}, {&b, 1.0}});
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() - b.value();
  if (t == nullptr) return Var(v);
  return t->record(v, {{&a, 1.0}, {&b, -1.0}});
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() * b.value();
  if (t == nullptr) return Var(v);
  return t->record(v, {{&a, b.value()}, {&b, a.value()}});
}

Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) throw NumericalError("autodiff: division by zero");
  Tape* t = common_tape(a, b);
  const double v = a.value() / b.value();
  if (t == nullptr) return Var(v);
  return t->record(v, {{&a, 1.0 / b.value()}, {&b, -v / b.value()}});
}

Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value());
  return a.tape()->record(-a.value(), {{&a, -1.0}});
}

Var log(const Var& x) {
  if (!(x.value() > 0.0)) {
    throw NumericalError("autodiff: log of a nonpositive value");
  }
  const double v = std::log(x.value());
  if (x.is_constant()) return Var(v);
  return x.tape()->record(v, {{&x, 1.0 / x.value()}});
}

Var exp(const Var& x) {
  const double v = std::exp(x.value());
  if (x.is_constant()) return Var(v);
  return x.tape()->record(v, {{&x, v}});
}

Var clamp_below(const Var& x, double floor) {
  if (x.value() >= floor) return x;
  return Var(floor);
}

Var logsumexp(std::span<const Var> xs) {
  if (xs.empty()) throw ConfigError("empty reduction");
  Tape* t = common_tape(xs);
  double max = -std::numeric_limits<double>::infinity();
  for (const Var& x : xs) {
    if (std::isnan(x.value())) throw NumericalError("logsumexp: NaN input");
    max = std::max(max, x.value());
  }
  if (std::isinf(max)) {
    // All -inf (or a +inf): no finite softmax, gradient is zero.
    return Var(max);
  }
  double acc = 0.0;
  for (const Var& x : xs) acc += std::exp(x.value() - max);
  const double v = max + std::log(acc);
  if (t == nullptr) return Var(v);
  std::vector<Tape::Edge> edges;
  edges.reserve(xs.size());
  for (const Var& x : xs) edges.push_back({&x, std::exp(x.value() - v)});
  return t->record(v, edges);
}

Var sum(std::span<const Var> xs) {
  Tape* t = common_tape(xs);
  double v = 0.0;
  for (const Var& x : xs) v += x.value();
  if (t == nullptr) return Var(v);
  std::vector<Tape::Edge> edges;
  edges.reserve(xs.size());
  for (const Var& x : xs) edges.push_back({&x, 1.0});
  return t->record(v, edges);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw ConfigError("dot: dimension mismatch");
  Tape* ta = common_tape(a);
  Tape* tb = common_tape(b);
  if (ta != nullptr && tb != nullptr && ta != tb) {
    throw Error("autodiff: operands live on different tapes");
  }
  Tape* t = ta != nullptr ? ta : tb;
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) v += a[i].value() * b[i].value();
  if (t == nullptr) return Var(v);
  std::vector<Tape::Edge> edges;
  edges.reserve(2 * a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    edges.push_back({&a[i], b[i].value()});
    edges.push_back({&b[i], a[i].value()});
  }
  return t->record(v, edges);
}

std::vector<double> gradient(const ScalarFunction& f,
                             std::span<const double> point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (double x : point) leaves.push_back(tape.variable(x));
  const Var out = f(leaves);
  tape.backward(out);
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) grad[i] = tape.adjoint(leaves[i]);
  return grad;
}

double gradcheck(const ScalarFunction& f, std::span<const double> point,
                 double eps) {
  const std::vector<double> analytic = gradient(f, point);
  std::vector<Var> shifted(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    shifted[i] = Var(point[i] + eps);
    const double up = f(shifted).value();
    shifted[i] = Var(point[i] - eps);
    const double down = f(shifted).value();
    shifted[i] = Var(point[i]);
    const double fd = (up - down) / (2.0 * eps);
    const double err =
        std::abs(fd - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace rdp::ad
