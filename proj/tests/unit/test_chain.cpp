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

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rdpkit/chain.hpp"
#include "rdpkit/error.hpp"
#include "rdpkit/proposals.hpp"
#include "test_support.hpp"

using namespace rdp;
using namespace rdp::chain;
using testing::random_chain;

namespace {

ChainPotentials point_mass(std::size_t length, std::size_t n) {
  ChainPotentials p(length, n, kNegInf);
  p.init[0] = 0.7;
  for (std::size_t t = 0; t + 1 < length; ++t) p.pair(t, 0, 0) = -0.2;
  return p;
}

double variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - mean) * (x - mean);
  return v / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("exact_forward closed forms") {
  CHECK(exact_forward(ChainPotentials(2, 2, 0.0)).log_z ==
        doctest::Approx(std::log(4.0)));
  ChainPotentials single(1, 2);
  single.init = {std::log(2.0), std::log(3.0)};
  CHECK(exact_forward(single).log_z == doctest::Approx(std::log(5.0)));
}

TEST_CASE("exact_forward and exact_entropy agree with enumeration") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 1 + rng.next_u64() % 5;
    const std::size_t n = 1 + rng.next_u64() % 8;
    if (std::pow(double(n), double(t)) > kBruteForceLimit) continue;
    const auto p = random_chain(t, n, rng, 1.5);
    const auto brute = brute_force_chain(p);
    CHECK(testing::rel_err(exact_forward(p).log_z, brute.log_z) < 1e-10);
    CHECK(std::abs(exact_entropy(p) - brute.entropy) < 1e-8);
  }
}

TEST_CASE("exact_forward reports an unreachable step") {
  ChainPotentials p(3, 2, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 2; ++i) p.pair(1, j, i) = kNegInf;
  }
  CHECK_THROWS_WITH_AS(exact_forward(p), "unreachable step 3", NumericalError);
}

TEST_CASE("exact_entropy closed forms") {
  CHECK(exact_entropy(ChainPotentials(2, 2, 0.0)) == doctest::Approx(std::log(4.0)));
  CHECK(std::abs(exact_entropy(point_mass(4, 3))) < 1e-15);
}

TEST_CASE("brute_force_chain") {
  const auto uniform = brute_force_chain(ChainPotentials(2, 2, 0.0));
  CHECK(uniform.log_z == doctest::Approx(std::log(4.0)));
  CHECK(uniform.entropy == doctest::Approx(std::log(4.0)));
  CHECK(brute_force_chain(point_mass(3, 3)).entropy == 0.0);
  CHECK_THROWS_AS(brute_force_chain(ChainPotentials(7, 8, 0.0)), GuardError);
}

TEST_CASE("full-index selection reduces every randomized op to its exact form") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_chain(5, 6, rng);
    const auto full = Selection::full(5, 6);
    const auto exact = exact_forward(p);
    const auto fwd = randomized_forward(p, full);
    CHECK(fwd.log_z == exact.log_z);
    CHECK(std::abs(randomized_entropy(p, full, fwd) - exact_entropy(p)) < 1e-10);
  }
}

TEST_CASE("single-state chains are exact for any selection") {
  Rng rng(9);
  const auto p = random_chain(6, 1, rng);
  const auto sel = Selection::from_proposal(proposals::uniform_proposal(1, 6), 0, 3,
                                            Rng(1));
  const auto fwd = randomized_forward(p, sel);
  CHECK(std::abs(fwd.log_z - exact_forward(p).log_z) < 1e-12);
  CHECK(std::abs(randomized_entropy(p, sel, fwd)) < 1e-12);
  Rng noise_rng(4);
  const auto noise = gumbel_noise(noise_rng, 6);
  const auto sample = gumbel_backward_sample(p, sel, fwd, noise);
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(sample.hard[t] == 0);
    REQUIRE(sample.soft[t].size() == 1);
    CHECK(sample.soft[t][0] == doctest::Approx(1.0));
  }
}

TEST_CASE("selection and forward mismatches are rejected") {
  Rng rng(2);
  const auto p = random_chain(4, 5, rng);
  const auto q = proposals::uniform_proposal(5, 4);
  const auto a = Selection::from_proposal(q, 1, 2, Rng(1));
  const auto b = Selection::from_proposal(q, 1, 2, Rng(2));
  const auto fwd = randomized_forward(p, a);
  CHECK_THROWS_AS(randomized_entropy(p, b, fwd), ConfigError);
  const auto noise = std::vector<double>(20, 0.0);
  CHECK_THROWS_AS(gumbel_backward_sample(p, b, fwd, noise), ConfigError);
  CHECK_THROWS_AS(gumbel_backward_sample(p, a, fwd, noise, 0.0), ConfigError);
  CHECK_THROWS_AS(randomized_forward(p, Selection::full(3, 5)), ConfigError);
}

TEST_CASE("randomized forward is unbiased in linear space") {
  Rng rng(55);
  const auto p = random_chain(4, 6, rng);
  const double log_z = exact_forward(p).log_z;
  const auto q = proposals::uniform_proposal(6, 4);
  const std::size_t runs = 20000;
  std::vector<double> ratio(runs);
  double mean_log = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto sel = Selection::from_proposal(q, 2, 2, Rng(1000 + r));
    const double lz = randomized_forward(p, sel).log_z;
    ratio[r] = std::exp(lz - log_z);
    mean_log += lz;
  }
  mean_log /= runs;
  double mean = 0.0;
  for (double x : ratio) mean += x;
  mean /= runs;
  const double se = std::sqrt(variance(ratio) / runs);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
  // Jensen: the log-space estimate sits below log Z on average.
  CHECK(mean_log <= log_z + 3.0 * se);
}

TEST_CASE("oracle proposal gives zero variance on rank-1 outgoing potentials") {
  Rng rng(77);
  const std::size_t len = 5, n = 8;
  ChainPotentials p(len, n);
  for (double& v : p.init) v = rng.normal();
  for (std::size_t t = 0; t + 1 < len; ++t) {
    std::vector<double> u(n), w(n);
    for (double& x : u) x = rng.normal();
    for (double& x : w) x = rng.normal();
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) p.pair(t, j, i) = u[j] + w[i];
    }
  }
  const auto exact = exact_forward(p);
  const auto q = proposals::oracle_proposal(p, exact);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto sel = Selection::from_proposal(q, 2, 1, Rng(seed));
    CHECK(std::abs(randomized_forward(p, sel).log_z - exact.log_z) < 1e-8);
  }
}

TEST_CASE("tail variance scales as 1/K2 on a single-step chain") {
  Rng rng(12);
  const auto p = random_chain(1, 20, rng);
  const double log_z = exact_forward(p).log_z;
  const auto q = proposals::uniform_proposal(20, 1);
  auto var_for = [&](std::size_t k2) {
    std::vector<double> z(100000);
    for (std::size_t r = 0; r < z.size(); ++r) {
      const auto sel = Selection::from_proposal(q, 0, k2, Rng(r));
      z[r] = std::exp(randomized_forward(p, sel).log_z - log_z);
    }
    return variance(z);
  };
  const double ratio = var_for(2) / var_for(1);
  CHECK(std::abs(ratio - 0.5) < 0.1);
}

TEST_CASE("variance does not increase with K1 on long-tailed chains") {
  Rng rng(19);
  const std::size_t len = 4, n = 16;
  const auto p = random_chain(len, n, rng, 3.0);
  const auto q = proposals::uniform_proposal(n, len);
  double previous = HUGE_VAL;
  for (std::size_t k1 : {std::size_t{0}, n / 4, n / 2}) {
    std::vector<double> est(4000);
    for (std::size_t r = 0; r < est.size(); ++r) {
      const auto sel = Selection::from_proposal(q, k1, 2, Rng(r));
      est[r] = randomized_forward(p, sel).log_z;
    }
    const double v = variance(est);
    CHECK(v <= previous);
    previous = v;
  }
}

TEST_CASE("gumbel backward sampling matches the enumerated posterior") {
  Rng rng(41);
  const auto p = random_chain(3, 3, rng);
  const auto brute = brute_force_chain(p);
  const auto full = Selection::full(3, 3);
  const auto fwd = randomized_forward(p, full);
  std::vector<double> counts(27, 0.0);
  const std::size_t draws = 50000;
  Rng noise_rng(5);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto noise = gumbel_noise(noise_rng, 9);
    const auto s = gumbel_backward_sample(p, full, fwd, noise);
    counts[static_cast<std::size_t>(s.hard[0] * 9 + s.hard[1] * 3 + s.hard[2])] += 1;
  }
  double chi2 = 0.0;
  for (std::size_t k = 0; k < 27; ++k) {
    const double expected = draws * brute.posterior[k];
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  const boost::math::chi_squared dist(26);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.001);
}

TEST_CASE("soft samples concentrate on the hard sample at low temperature") {
  Rng rng(8);
  const auto p = random_chain(4, 6, rng);
  const auto sel = Selection::from_proposal(proposals::uniform_proposal(6, 4), 2,
                                            2, Rng(3));
  const auto fwd = randomized_forward(p, sel);
  Rng noise_rng(6);
  const auto noise = gumbel_noise(noise_rng, 24);
  const auto warm = gumbel_backward_sample(p, sel, fwd, noise, 1.0);
  const auto cold = gumbel_backward_sample(p, sel, fwd, noise, 0.01);
  CHECK(warm.hard == cold.hard);
  for (std::size_t t = 0; t < 4; ++t) {
    const auto& soft = cold.soft[t];
    const auto best = std::max_element(soft.begin(), soft.end()) - soft.begin();
    CHECK(soft[static_cast<std::size_t>(best)] > 0.99);
    CHECK(cold.support[t][static_cast<std::size_t>(best)] == cold.hard[t]);
    const auto& ws = warm.soft[t];
    const auto warm_best = std::max_element(ws.begin(), ws.end()) - ws.begin();
    CHECK(warm.support[t][static_cast<std::size_t>(warm_best)] == warm.hard[t]);
  }
}

TEST_CASE("randomized forward records O(T K^2) tape nodes") {
  Rng rng(4);
  const std::size_t len = 4, n = 60, k1 = 5, k2 = 1;
  const auto p = random_chain(len, n, rng);
  const auto sel = Selection::from_proposal(proposals::uniform_proposal(n, len),
                                            k1, k2, Rng(2));
  ad::Tape tape;
  const auto tp = attach(tape, p);
  const std::size_t leaves = tape.size();
  (void)randomized_forward(tp, sel);
  const std::size_t rdp_nodes = tape.size() - leaves;
  const double k = static_cast<double>(k1 + k2);
  CHECK(rdp_nodes <= 3.0 * len * k * k);

  const std::size_t before_exact = tape.size();
  (void)exact_forward(tp);
  const std::size_t exact_nodes = tape.size() - before_exact;
  CHECK(exact_nodes >= static_cast<std::size_t>((len - 1) * n * n));
}

TEST_CASE("adjoints outside the active set are exactly zero") {
  Rng rng(14);
  const std::size_t len = 4, n = 7;
  const auto p = random_chain(len, n, rng);
  const auto sel = Selection::from_proposal(proposals::uniform_proposal(n, len),
                                            1, 2, Rng(9));
  ad::Tape tape;
  const auto tp = attach(tape, p);
  tape.backward(randomized_forward(tp, sel).log_z);
  for (std::size_t t = 0; t + 1 < len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const bool active = sel.position(t, int(j)) >= 0 &&
                            sel.position(t + 1, int(i)) >= 0;
        if (!active) CHECK(tape.adjoint(tp.pair(t, j, i)) == 0.0);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sel.position(0, int(i)) < 0) CHECK(tape.adjoint(tp.init[i]) == 0.0);
  }
}
