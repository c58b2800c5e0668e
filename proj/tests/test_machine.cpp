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

TEST_CASE("total_matrix sums the symbol matrices") {
  const DenseMatrix w2 = total_matrix(m2());
  CHECK(w2(0, 1) == 0.5);
  CHECK(w2(0, 0) == 0.0);
  CHECK(w2(1, 0) == 0.0);
  CHECK(w2(1, 1) == 0.0);
  CHECK(total_matrix(m3()).isZero(0.0));
  CHECK(total_matrix(m1())(0, 0) == 0.5);
}

TEST_CASE("epsilon is always present and appended when missing") {
  const auto m = m2();
  REQUIRE(m.num_symbols() == 3);
  CHECK(m.alphabet_size() == 2);
  CHECK(m.symbol_name(2) == "eps");
  CHECK(m.epsilon_id() == 2);
  CHECK(m.transition(2).isZero(0.0));

  DenseMatrix w = DenseMatrix::Zero(1, 1);
  w << 0.25;
  const Machine<double> with_eps({"eps", "x"}, DenseVector::Ones(1), DenseVector::Ones(1), {w, w});
  CHECK(with_eps.num_symbols() == 2);
  CHECK(with_eps.epsilon_id() == 0);
}

TEST_CASE("machine validation") {
  const DenseVector one = DenseVector::Ones(1);
  DenseMatrix w(1, 1);
  w << 0.5;
  DenseMatrix neg(1, 1);
  neg << -0.1;
  CHECK_THROWS_AS(Machine<double>({"a"}, one, one, {neg}), ValidationError);
  CHECK_THROWS_AS(Machine<double>({"a", "a"}, one, one, {w, w}), ValidationError);
  CHECK_THROWS_AS(Machine<double>({"a"}, DenseVector::Zero(1), one, {w}), ValidationError);
  CHECK_THROWS_AS(Machine<double>({"a"}, one, DenseVector::Zero(1), {w}), ValidationError);
  CHECK_THROWS_AS(Machine<double>({"a"}, one, one, {DenseMatrix::Zero(2, 2)}), ValidationError);
  CHECK_THROWS_AS(Machine<double>({"a"}, one, one, {}), ValidationError);
  DenseMatrix nan(1, 1);
  nan << std::nan("");
  CHECK_THROWS_AS(Machine<double>({"a"}, one, one, {nan}), ValidationError);
}

TEST_CASE("build_cache on the reference machines") {
  const auto c1 = build_cache(m1());
  CHECK(c1.wstar(0, 0) == 2.0);
  CHECK(c1.s(0) == 2.0);
  CHECK(c1.e(0) == 2.0);
  CHECK(c1.z == 2.0);
  CHECK(c1.rho == doctest::Approx(0.5));

  const auto c2 = build_cache(m2());
  CHECK(c2.z == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c2.s(0) == 1.0);
  CHECK(c2.s(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c2.e(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c2.e(1) == 1.0);

  const auto c3 = build_cache(m3());
  CHECK(c3.z == 2.0);
  CHECK(c3.wstar == DenseMatrix::Identity(2, 2));
}

TEST_CASE("build_cache errors") {
  DenseMatrix loop(1, 1);
  loop << 1.0;
  CHECK_THROWS_AS(build_cache(Machine<double>({"a"}, DenseVector::Ones(1), DenseVector::Ones(1), {loop})),
                  DivergentMachine);
  // start at 0, end at 1, nothing connects them
  DenseVector start(2), end(2);
  start << 1, 0;
  end << 0, 1;
  CHECK_THROWS_AS(build_cache(Machine<double>({"a"}, start, end, {DenseMatrix::Zero(2, 2)})),
                  DegenerateMachine);
}

TEST_CASE("trajectory weights and probabilities") {
  const auto a = m1();
  const auto c1 = build_cache(a);
  Trajectory twice{0, {kLoop, kLoop}};
  CHECK(trajectory_weight(a, twice) == 0.25);
  for (int k = 0; k < 6; ++k) {
    Trajectory t{0, std::vector<Transition>(static_cast<std::size_t>(k), kLoop)};
    CHECK(trajectory_probability(a, c1, t) == doctest::Approx(std::pow(0.5, k) / 2).epsilon(1e-15));
  }
  CHECK(trajectory_probability(a, c1, Trajectory{0, {}}) == 0.5);

  const auto b = m2();
  const auto c2 = build_cache(b);
  CHECK(trajectory_weight(b, Trajectory{0, {kArcA}}) == 0.3);
  CHECK(trajectory_weight(b, Trajectory{0, {}}) == 0.0);
  CHECK(trajectory_probability(b, c2, Trajectory{0, {kArcB}}) == doctest::Approx(0.4).epsilon(1e-15));

  CHECK_THROWS_AS(trajectory_weight(b, Trajectory{0, {kArcA, kArcA}}), ValidationError);
}

TEST_CASE("Z agrees with the length-truncated sum") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_machine(2 + seed % 5, 1 + seed % 3, 0.6, seed);
    const auto cache = build_cache(m);
    const auto budget = budget_for_length(m, 60, 1e-8);
    const double z60 = enumerate_z(m, budget);
    CHECK(std::abs(z60 - cache.z) <= budget.tail_bound + 1e-12 * cache.z);
    CHECK(std::abs(z60 - cache.z) <= 1e-8);
  }
}

TEST_CASE("length masses sum to one") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_machine(3 + seed, 2, 0.5, 100 + seed);
    const auto cache = build_cache(m);
    const DenseMatrix w = total_matrix(m);
    DenseVector u = m.start();
    double mass = 0.0;
    for (int k = 0; k < 200; ++k) {
      mass += u.dot(m.end()) / cache.z;
      u = (w.transpose() * u).eval();
    }
    CHECK(std::abs(mass - 1.0) < 1e-10);
  }
}

TEST_CASE("merging symbol matrices leaves W* and Z unchanged") {
  const auto m = random_machine(4, 3, 0.5, 42);
  std::vector<DenseMatrix> merged = {m.transition(0) + m.transition(1), m.transition(2), m.transition(3)};
  const Machine<double> fused({"ab", "c", "eps"}, m.start(), m.end(), merged);
  const auto c0 = build_cache(m);
  const auto c1 = build_cache(fused);
  CHECK((c0.wstar - c1.wstar).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(c0.z - c1.z) <= 1e-12 * c0.z);
}

TEST_CASE("machines are generic over the scalar type") {
  Matrix<long double> w(1, 1);
  w << 0.5L;
  const Machine<long double> m({"a"}, Vector<long double>::Ones(1), Vector<long double>::Ones(1), {w});
  CHECK(build_cache(m).z == 2.0L);
}
