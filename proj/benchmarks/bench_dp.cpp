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

#include <benchmark/benchmark.h>

#include <cstddef>

#include "rdpkit/autodiff.hpp"
#include "rdpkit/chain.hpp"
#include "rdpkit/harness.hpp"
#include "rdpkit/hypertree.hpp"
#include "rdpkit/proposals.hpp"

namespace {

using namespace rdp;

constexpr std::size_t kLength = 20;

const harness::SimulatedChain& chain_instance(std::size_t n) {
  static std::size_t cached_n = 0;
  static harness::SimulatedChain sim;
  if (cached_n != n) {
    sim = harness::simulate_chain(n, kLength, harness::ProfileKind::kIntermediate, 1);
    cached_n = n;
  }
  return sim;
}

Selection chain_selection(const harness::SimulatedChain& sim, std::size_t k, std::uint64_t seed) {
  return Selection::from_proposal(
      harness::make_proposal(sim, harness::ProposalKind::kLocalGlobal), k - 1, 1, Rng(seed));
}

void BM_ExactForward(benchmark::State& state) {
  const auto& sim = chain_instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(chain::exact_forward(sim.potentials).log_z);
}

// range(1) is K as a percentage of N.
void BM_RandomizedForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto& sim = chain_instance(n);
  const std::size_t k = std::max<std::size_t>(2, n * static_cast<std::size_t>(state.range(1)) / 100);
  const auto sel = chain_selection(sim, k, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chain::randomized_forward(sim.potentials, sel).log_z);
  }
}

void BM_SelectAndForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto& sim = chain_instance(n);
  const auto q = harness::make_proposal(sim, harness::ProposalKind::kLocalGlobal);
  const std::size_t k = std::max<std::size_t>(2, n / 5);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto sel = Selection::from_proposal(q, k - 1, 1, Rng(seed++));
    benchmark::DoNotOptimize(chain::randomized_forward(sim.potentials, sel).log_z);
  }
}

void BM_RandomizedEntropy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto& sim = chain_instance(n);
  const auto sel = chain_selection(sim, std::max<std::size_t>(2, n / 5), 3);
  const auto fwd = chain::randomized_forward(sim.potentials, sel);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chain::randomized_entropy(sim.potentials, sel, fwd));
  }
}

void BM_ExactForwardBackward(benchmark::State& state) {
  const auto& sim = chain_instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    const auto tp = chain::attach(tape, sim.potentials);
    tape.backward(chain::exact_forward(tp).log_z);
    state.counters["tape_nodes"] = static_cast<double>(tape.size());
  }
}

void BM_RandomizedForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto& sim = chain_instance(n);
  const auto sel = chain_selection(sim, std::max<std::size_t>(2, n / 5), 3);
  for (auto _ : state) {
    ad::Tape tape;
    const auto tp = chain::attach(tape, sim.potentials, &sel);
    tape.backward(chain::randomized_forward(tp, sel).log_z);
    state.counters["tape_nodes"] = static_cast<double>(tape.size());
  }
}

void BM_ExactInside(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sim = harness::simulate_tree(n, 8, harness::ProfileKind::kIntermediate, 1);
  for (auto _ : state) benchmark::DoNotOptimize(tree::exact_inside(sim.potentials).log_z);
}

void BM_RandomizedInside(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sim = harness::simulate_tree(n, 8, harness::ProfileKind::kIntermediate, 1);
  const auto sel = Selection::from_proposal(
      proposals::uniform_proposal(n, tree::num_spans(8)), n / 5 - 1, 1, Rng(3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree::randomized_inside(sim.potentials, sel).log_z);
  }
}

}  // namespace

BENCHMARK(BM_ExactForward)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomizedForward)
    ->ArgsProduct({{100, 500}, {1, 10, 20}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectAndForward)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomizedEntropy)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactForwardBackward)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomizedForwardBackward)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactInside)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomizedInside)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
