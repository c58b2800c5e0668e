// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "wfsm/oracle.hpp"
#include "wfsm/random.hpp"

using namespace wfsm;
using namespace wfsm::testing;

TEST_CASE("enumerate_z examples") {
  const auto a = m1();
  const auto b1 = make_budget(a, 1e-8);
  CHECK(b1.tail_bound < 1e-8);
  CHECK(std::abs(enumerate_z(a, b1) - 2.0) < 1e-8);
  // the exact tail of M1 after L is 0.5^L
  CHECK(budget_for_length(a, 10, 1.0).tail_bound >= std::pow(0.5, 10));

  // nilpotent machines have an exact zero tail
  const auto b = m2();
  const auto b2 = make_budget(b, 1e-12);
  CHECK(b2.tail_bound == 0.0);
  CHECK(b2.max_length <= 1);
  CHECK(enumerate_z(b, b2) == doctest::Approx(0.5).epsilon(1e-15));

  const auto c = m3();
  const auto b3 = make_budget(c, 1e-12);
  CHECK(b3.max_length == 0);
  CHECK(enumerate_z(c, b3) == 2.0);
}

TEST_CASE("enumerate_z refuses an insufficient budget") {
  const auto a = m1();
  CHECK_THROWS_AS(enumerate_z(a, budget_for_length(a, 3, 1e-8)), BudgetInsufficient);
  CHECK_THROWS_AS(make_budget(a, 1e-8, 5), BudgetInsufficient);
}

TEST_CASE("tail bounds hold") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_machine(2 + seed % 5, 1 + seed % 3, 0.5 + 0.02 * double(seed), seed);
    const double z = build_cache(m).z;
    for (std::size_t len : {0u, 5u, 20u}) {
      const auto budget = budget_for_length(m, len, 1e300);
      const double partial = enumerate_z(m, budget);
      CHECK(z - partial <= budget.tail_bound * (1 + 1e-9) + 1e-12 * z);
    }
  }
}

TEST_CASE("finite differences on the single-state machine") {
  const auto a = m1();
  const auto g = fd_gradient(a);
  CHECK(rel_close(g.tensor[0], 4.0, 1e-8));
  CHECK(g.one_sided[0] == 0);
  const auto h = fd_hessian(a);
  CHECK(rel_close(h.tensor[0], 16.0, 1e-5));
}

TEST_CASE("finite differences clamp at zero weights") {
  const auto b = m2();
  const auto g = fd_gradient(b);
  const auto space = b.space();
  const Transition back{0, 1, 0};
  CHECK(g.one_sided[space.index(back)] == 1);
  CHECK(g.one_sided[space.index(kArcA)] == 0);
  CHECK(rel_close(g.tensor[space.index(back)], 0.25, 1e-4));
  CHECK(rel_close(g.tensor[space.index(kArcA)], 1.0, 1e-8));
}

TEST_CASE("naive and semiring second order on the single-state machine") {
  const auto a = m1();
  const auto len = length_function(a.space());
  CHECK(std::abs(naive_second_order(a, len, len).matrix(0, 0) - 3.0) < 1e-12);
  CHECK(std::abs(semiring_second_order(a, len, len).matrix(0, 0) - 3.0) < 1e-12);
  CHECK(semiring_second_order(a, len, len).z == 2.0);
}

TEST_CASE("semiring closure matches the pair sum") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto m = random_machine(2 + seed % 4, 2, 0.5, 40 + seed);
    const auto r = random_function(m.space(), 3, m.space().size(), 60 + seed);
    const auto t = random_function(m.space(), 2, m.space().size(), 80 + seed);
    const auto x = naive_second_order(m, r, t).matrix;
    const auto y = semiring_second_order(m, r, t).matrix;
    CHECK((x - y).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, x.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("forward statistics equal literal path sums") {
  const auto m = random_machine(3, 1, 0.5, 2);
  const auto r = random_function(m.space(), 2, 8, 3);
  const auto t = random_function(m.space(), 2, 8, 4);
  const auto dp = truncated_statistics(m, r, t, 6);
  const auto lit = literal_statistics(m, r, t, 6);
  CHECK(std::abs(dp.z - lit.z) < 1e-13 * lit.z);
  CHECK((dp.mean_r - lit.mean_r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dp.mean_t - lit.mean_t).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dp.second - lit.second).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("literal enumeration is guarded") {
  const auto big = random_machine(4, 1, 0.5, 1);
  const auto f = length_function(big.space());
  CHECK_THROWS_AS(literal_statistics(big, f, f, 2), BudgetInsufficient);
  const auto a = m1();
  const auto g = length_function(a.space());
  CHECK_THROWS_AS(literal_statistics(a, g, g, 13), BudgetInsufficient);
}
