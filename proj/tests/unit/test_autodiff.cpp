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
#include "rdpkit/autodiff.hpp"
#include "rdpkit/chain.hpp"
#include "rdpkit/error.hpp"
#include "rdpkit/proposals.hpp"
#include "test_support.hpp"

using namespace rdp;
using ad::Tape;
using ad::Var;

TEST_CASE("elementary derivatives") {
  Tape tape;
  Var x = tape.variable(3.0);
  Var y = ad::log(ad::exp(x));
  tape.backward(y);
  CHECK(tape.adjoint(x) == doctest::Approx(1.0));

  Tape t2;
  Var a = t2.variable(2.0);
  Var b = t2.variable(5.0);
  t2.backward(a * b);
  CHECK(t2.adjoint(a) == doctest::Approx(5.0));
  CHECK(t2.adjoint(b) == doctest::Approx(2.0));
}

TEST_CASE("logsumexp gradient is the softmax") {
  Tape tape;
  const std::vector<Var> xs{tape.variable(0.3), tape.variable(-1.2)};
  tape.backward(ad::logsumexp(xs));
  const double z = std::exp(0.3) + std::exp(-1.2);
  CHECK(tape.adjoint(xs[0]) == doctest::Approx(std::exp(0.3) / z));
  CHECK(tape.adjoint(xs[1]) == doctest::Approx(std::exp(-1.2) / z));
}

TEST_CASE("sum of leaves seeds unit adjoints") {
  Tape tape;
  const std::vector<Var> xs{tape.variable(1), tape.variable(2), tape.variable(3)};
  Var out = ad::sum(xs);
  tape.backward(out);
  CHECK(tape.adjoint(out) == 1.0);
  for (const Var& x : xs) CHECK(tape.adjoint(x) == 1.0);
}

TEST_CASE("error contracts") {
  Tape tape;
  Var x = tape.variable(0.0);
  CHECK_THROWS_AS(ad::log(x), NumericalError);
  CHECK_THROWS_AS(tape.variable(1.0) / x, NumericalError);
  CHECK_THROWS_AS(ad::logsumexp(std::vector<Var>{}), ConfigError);

  Var y = x + tape.variable(2.0);
  tape.backward(y);
  CHECK_THROWS_AS(tape.backward(y), Error);
  tape.zero_adjoints();
  CHECK_NOTHROW(tape.backward(y));

  Tape other;
  Var z = other.variable(1.0);
  CHECK_THROWS_AS(x + z, Error);
}

TEST_CASE("constants record nothing") {
  Tape tape;
  Var x = tape.variable(1.0);
  const std::size_t before = tape.size();
  Var c = Var(2.0) * Var(3.0) + Var(1.0);
  CHECK(c.is_constant());
  CHECK(c.value() == 7.0);
  CHECK(tape.size() == before);
  Var y = x * c;
  CHECK(tape.size() == before + 1);
  tape.backward(y);
  CHECK(tape.adjoint(x) == 7.0);
}

TEST_CASE("tape size grows linearly with recorded operations") {
  Tape tape;
  Var x = tape.variable(0.5);
  Var acc = x;
  for (int i = 1; i <= 1000; ++i) {
    acc = acc * x + Var(1.0);
    CHECK(tape.size() == 1 + 2 * static_cast<std::size_t>(i));
  }
}

TEST_CASE("gradcheck on logsumexp") {
  Rng rng(17);
  std::vector<double> point(6);
  for (double& p : point) p = 2.0 * rng.normal();
  const double err = ad::gradcheck(
      [](std::span<const Var> xs) { return ad::logsumexp(xs); }, point, 1e-6);
  CHECK(err < 1e-6);
}

namespace {

chain::TapeChainPotentials unpack(std::span<const Var> xs, std::size_t length,
                                  std::size_t n) {
  chain::TapeChainPotentials p;
  p.length = length;
  p.num_states = n;
  p.init.assign(xs.begin(), xs.begin() + static_cast<long>(n));
  p.pairwise.assign(xs.begin() + static_cast<long>(n), xs.end());
  return p;
}

std::vector<double> pack(const chain::ChainPotentials& p) {
  std::vector<double> out(p.init);
  out.insert(out.end(), p.pairwise.begin(), p.pairwise.end());
  return out;
}

}  // namespace

TEST_CASE("gradcheck on exact and fixed-seed randomized forward") {
  Rng rng(23);
  const auto base = testing::random_chain(4, 5, rng);
  const auto point = pack(base);
  const double exact_err = ad::gradcheck(
      [](std::span<const Var> xs) {
        return chain::exact_forward(unpack(xs, 4, 5)).log_z;
      },
      point, 1e-6);
  CHECK(exact_err < 1e-5);

  const auto sel = Selection::from_proposal(
      proposals::uniform_proposal(5, 4), 2, 2, Rng(8));
  const double rdp_err = ad::gradcheck(
      [&](std::span<const Var> xs) {
        return chain::randomized_forward(unpack(xs, 4, 5), sel).log_z;
      },
      point, 1e-6);
  CHECK(rdp_err < 1e-5);
}

TEST_CASE("d logZ / d log-potential equals the posterior edge marginal") {
  Rng rng(31);
  const auto p = testing::random_chain(3, 3, rng);
  Tape tape;
  const auto tp = chain::attach(tape, p);
  tape.backward(chain::exact_forward(tp).log_z);

  const auto brute = chain::brute_force_chain(p);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < 3; ++i) {
        double marginal = 0.0;
        for (std::size_t k = 0; k < brute.paths.size(); ++k) {
          const auto& path = brute.paths[k];
          if (path[t] == static_cast<int>(j) && path[t + 1] == static_cast<int>(i)) {
            marginal += brute.posterior[k];
          }
        }
        CHECK(std::abs(tape.adjoint(tp.pair(t, j, i)) - marginal) < 1e-12);
      }
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    double marginal = 0.0;
    for (std::size_t k = 0; k < brute.paths.size(); ++k) {
      if (brute.paths[k][0] == static_cast<int>(i)) marginal += brute.posterior[k];
    }
    CHECK(std::abs(tape.adjoint(tp.init[i]) - marginal) < 1e-12);
  }
}
