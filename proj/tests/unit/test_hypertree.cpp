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
#include "rdpkit/hypertree.hpp"
#include "rdpkit/proposals.hpp"
#include "test_support.hpp"

using namespace rdp;
using namespace rdp::tree;
using testing::random_tree;

TEST_CASE("span indexing is a bijection onto [0, num_spans)") {
  for (std::size_t len = 1; len <= 7; ++len) {
    std::vector<int> seen(num_spans(len), 0);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = i; j < len; ++j) ++seen[span_index(i, j, len)];
    }
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("brute_force_trees small cases") {
  // One bracketing, three labeled nodes with two labels each.
  const auto two = brute_force_trees(HypertreePotentials(2, 2, 0.0));
  CHECK(two.trees.size() == 8);
  CHECK(two.log_z == doctest::Approx(std::log(8.0)));
  // Catalan(2) bracketings with a single label.
  const auto three = brute_force_trees(HypertreePotentials(3, 1, 0.0));
  CHECK(three.trees.size() == 2);
  CHECK(three.log_z == doctest::Approx(std::log(2.0)));

  HypertreePotentials point(3, 2, kNegInf);
  for (std::size_t i = 0; i < 3; ++i) point.at(i, i, 1) = 0.4;
  point.at(0, 1, 0) = 0.1;
  point.at(0, 2, 1) = -0.3;
  const auto single = brute_force_trees(point);
  int survivors = 0;
  for (const auto& t : single.trees) {
    if (t.probability > 0.0) {
      ++survivors;
      CHECK(t.probability == doctest::Approx(1.0));
    }
  }
  CHECK(survivors == 1);
  CHECK_THROWS_AS(brute_force_trees(HypertreePotentials(6, 4, 0.0)), GuardError);
}

TEST_CASE("exact_inside closed forms") {
  CHECK(exact_inside(HypertreePotentials(2, 2, 0.0)).log_z ==
        doctest::Approx(std::log(8.0)));
  CHECK(exact_inside(HypertreePotentials(3, 1, 0.0)).log_z ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("exact_inside agrees with enumeration") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 1 + rng.next_u64() % 4;
    const std::size_t n = 1 + rng.next_u64() % 3;
    const auto p = random_tree(len, n, rng);
    CHECK(testing::rel_err(exact_inside(p).log_z, brute_force_trees(p).log_z) <
          1e-10);
  }
}

TEST_CASE("exact_inside reports an unreachable root") {
  HypertreePotentials p(3, 2, 0.0);
  p.at(0, 2, 0) = kNegInf;
  p.at(0, 2, 1) = kNegInf;
  CHECK_THROWS_WITH_AS(exact_inside(p), "unreachable root", NumericalError);
}

TEST_CASE("randomized inside reduces to exact") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_tree(5, 4, rng);
    const auto full = Selection::full(num_spans(5), 4);
    const double exact = exact_inside(p).log_z;
    CHECK(std::abs(randomized_inside(p, full).log_z - exact) < 1e-10);
    CHECK(std::abs(randomized_inside(p, full, InsideBlocks::kTwoBlock).log_z -
                   exact) < 1e-10);
  }
  const auto single = random_tree(5, 1, rng);
  const auto sel = Selection::from_proposal(
      proposals::uniform_proposal(1, num_spans(5)), 0, 2, Rng(4));
  CHECK(std::abs(randomized_inside(single, sel).log_z -
                 exact_inside(single).log_z) < 1e-12);
}

TEST_CASE("randomized inside shape checks") {
  const HypertreePotentials p(3, 2, 0.0);
  CHECK_THROWS_AS(randomized_inside(p, Selection::full(3, 2)), ConfigError);
}

namespace {

double mean_ratio(const HypertreePotentials& p, InsideBlocks blocks,
                  std::size_t runs, double* se) {
  const double log_z = exact_inside(p).log_z;
  const auto q = proposals::uniform_proposal(p.num_states, num_spans(p.length));
  std::vector<double> xs(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto sel = Selection::from_proposal(q, 2, 2, Rng(r));
    xs[r] = std::exp(randomized_inside(p, sel, blocks).log_z - log_z);
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(runs);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(runs);
  *se = std::sqrt(var / static_cast<double>(runs));
  return mean;
}

}  // namespace

TEST_CASE("full-cross randomized inside is unbiased; the two-block form is not") {
  Rng rng(21);
  const auto p = random_tree(4, 6, rng);
  double se = 0.0;
  const double full = mean_ratio(p, InsideBlocks::kFullCross, 20000, &se);
  CHECK(std::abs(full - 1.0) < 3.0 * se);
  const double two_block = mean_ratio(p, InsideBlocks::kTwoBlock, 20000, &se);
  CHECK(two_block < 1.0 - 3.0 * se);
}

TEST_CASE("randomized inside node count shrinks quadratically in K/N") {
  Rng rng(6);
  const std::size_t len = 4, n = 60, k = 6;
  const auto p = random_tree(len, n, rng);
  const auto sel = Selection::from_proposal(
      proposals::uniform_proposal(n, num_spans(len)), k - 1, 1, Rng(1));
  ad::Tape tape;
  const auto tp = attach(tape, p);
  std::size_t mark = tape.size();
  (void)exact_inside(tp);
  const double exact_nodes = static_cast<double>(tape.size() - mark);
  mark = tape.size();
  (void)randomized_inside(tp, sel);
  const double rdp_nodes = static_cast<double>(tape.size() - mark);
  const double ratio = exact_nodes / rdp_nodes;
  CHECK(ratio > 0.5 * (double(n) / double(k)) * (double(n) / double(k)));
}
