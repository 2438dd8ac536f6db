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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rdpkit/error.hpp"
#include "rdpkit/proposals.hpp"
#include "test_support.hpp"

using namespace rdp;
using namespace rdp::proposals;

TEST_CASE("uniform proposal") {
  const auto q = uniform_proposal(4, 2);
  for (std::size_t t = 0; t < 2; ++t) {
    for (double w : q.node(t)) CHECK(w == 0.25);
  }
  CHECK(uniform_proposal(1, 1).node(0)[0] == 1.0);
  const auto big = uniform_proposal(10000, 1);
  double total = 0.0;
  for (double w : big.node(0)) total += w;
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK_THROWS_AS(uniform_proposal(0, 3), ConfigError);
}

TEST_CASE("local-global proposal") {
  const std::vector<double> flat{1, 1, 1};
  const auto even = local_global_proposal(flat, std::vector<double>{2, 2, 2}, 1);
  for (double w : even.node(0)) CHECK(w == doctest::Approx(1.0 / 3.0));

  const auto local = local_global_proposal(std::vector<double>{2, 1, 1},
                                           std::vector<double>{5, 1, 1}, 1, 1.0);
  CHECK(local.node(0)[0] == doctest::Approx(0.5));
  CHECK(local.node(0)[1] == doctest::Approx(0.25));
  CHECK(local.node(0)[2] == doctest::Approx(0.25));

  const auto half = local_global_proposal(std::vector<double>{1, 0},
                                          std::vector<double>{0, 1}, 1, 0.5);
  CHECK(half.node(0)[0] == doctest::Approx(0.5));
  CHECK(half.node(0)[1] == doctest::Approx(0.5));

  CHECK_THROWS_AS(local_global_proposal(std::vector<double>{0, 0},
                                        std::vector<double>{1, 1}, 1, 0.5),
                  ConfigError);
  CHECK_THROWS_AS(local_global_proposal(std::vector<double>{1, 1},
                                        std::vector<double>{0, 0}, 1, 0.5),
                  ConfigError);
  CHECK_THROWS_AS(local_global_proposal(std::vector<double>{1, 1},
                                        std::vector<double>{1, 1}, 1, 1.5),
                  ConfigError);
}

TEST_CASE("oracle proposal") {
  const chain::ChainPotentials single_state(3, 1, 0.2);
  const auto one = oracle_proposal(single_state, chain::exact_forward(single_state));
  for (std::size_t t = 0; t < 3; ++t) CHECK(one.node(t)[0] == 1.0);

  const chain::ChainPotentials flat(4, 5, 0.0);
  const auto uniform = oracle_proposal(flat, chain::exact_forward(flat));
  for (std::size_t t = 0; t < 4; ++t) {
    for (double w : uniform.node(t)) CHECK(w == doctest::Approx(0.2));
  }

  Rng rng(3);
  const auto p = testing::random_chain(4, 6, rng);
  const auto fwd = chain::exact_forward(p);
  const auto q = oracle_proposal(p, fwd);
  for (std::size_t t = 0; t < 4; ++t) {
    double total = 0.0;
    for (double w : q.node(t)) {
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  const auto sel = Selection::from_proposal(uniform_proposal(6, 4), 1, 1, Rng(1));
  CHECK_THROWS_AS(oracle_proposal(p, chain::randomized_forward(p, sel)),
                  ConfigError);
}

TEST_CASE("selection from a proposal") {
  const auto q = local_global_proposal(
      std::vector<double>{4, 3, 2, 1, 4, 3, 2, 1}, std::vector<double>{1, 1, 1, 1},
      2, 1.0);
  const auto sel = Selection::from_proposal(q, 2, 3, Rng(10));
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(sel.node(t).topk == std::vector<int>{0, 1});
    CHECK(sel.node(t).sampled.size() == 3);
    for (const auto& d : sel.node(t).sampled) {
      CHECK((d.index == 2 || d.index == 3));
    }
  }
  // Same seed, same selection; the fingerprint follows the content.
  CHECK(Selection::from_proposal(q, 2, 3, Rng(10)).fingerprint() ==
        sel.fingerprint());
  CHECK(Selection::from_proposal(q, 2, 3, Rng(11)).fingerprint() !=
        sel.fingerprint());
  CHECK_THROWS_AS(Selection::from_proposal(q, 5, 0, Rng(1)), ConfigError);
  CHECK_THROWS_AS(Selection::from_proposal(q, 0, 0, Rng(1)), ConfigError);

  // Duplicate draws merge into one slot carrying count / (K2 q~).
  NodeSelection node;
  node.sampled = {{3, 0.25}, {3, 0.25}, {1, 0.5}};
  const Selection merged(4, 0, 3, {node});
  const auto active = merged.active(0);
  REQUIRE(active.size() == 2);
  CHECK(active[0].state == 3);
  CHECK(active[0].log_weight == doctest::Approx(std::log(2.0 / 0.75)));
  CHECK(active[1].state == 1);
  CHECK(active[1].log_weight == doctest::Approx(std::log(1.0 / 1.5)));
}

TEST_CASE("a massless tail falls back to K2 = 0 for that node") {
  const auto q = local_global_proposal(std::vector<double>{1, 0, 0},
                                       std::vector<double>{1, 1, 1}, 1, 1.0);
  const auto sel = Selection::from_proposal(q, 1, 2, Rng(3));
  CHECK(sel.node(0).sampled.empty());
  CHECK(sel.active(0).size() == 1);
}
