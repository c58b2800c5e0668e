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

#include <sstream>

#include "fixtures.hpp"
#include "wfsm/io.hpp"
#include "wfsm/random.hpp"

using namespace wfsm;
using namespace wfsm::testing;

namespace {

constexpr const char* kM1 =
    "wfsm v1\n"
    "# geometric\n"
    "states 1\n"
    "symbols a\n"
    "start 0 1.0\n"
    "end 0 1.0\n"
    "arc 0 0 a 0.5\n";

template <typename F>
ParseError parse_error(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError(0, 0, "");
}

}  // namespace

TEST_CASE("parse the geometric machine") {
  const auto m = io::parse_machine(kM1);
  CHECK(m.num_states() == 1);
  CHECK(m.alphabet_size() == 1);
  CHECK(m.num_symbols() == 2);
  CHECK(build_cache(m).z == 2.0);
}

TEST_CASE("statements may come in any order and eps arcs are ordinary") {
  const auto m = io::parse_machine(
      "wfsm v1\narc 0 1 eps 0.3\nend 1 1\nstart 0 1\nsymbols a\nstates 2\n");
  CHECK(m.weight(Transition{*m.symbol_id("eps"), 0, 1}) == 0.3);
  CHECK(build_cache(m).z == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 2\nsymbols a\nstart 0 1\nend 1 1\narc 0 5 a 0.1\n"),
                  ValidationError);
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 1\nsymbols a\nstart 0 1\nend 0 1\narc 0 0 a -0.1\n"),
                  ValidationError);
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 1\nsymbols a a\nstart 0 1\nend 0 1\n"), ValidationError);
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 1\nsymbols a\nstart 0 1\nend 0 1\narc 0 0 b 0.1\n"),
                  ValidationError);
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 1\nsymbols a\nstart 0 1\nstart 0 1\nend 0 1\n"),
                  ValidationError);
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 1\nsymbols a\nstart 0 1\nend 0 1\narc 0 0 a 1.5\n"),
                  ValidationError);
  CHECK_THROWS_AS(
      io::parse_machine("wfsm v1\nstates 1\nsymbols a\nstart 0 1\nend 0 1\narc 0 0 a 0.1\narc 0 0 a 0.1\n"),
      ValidationError);
}

TEST_CASE("parse errors carry a location") {
  auto e = parse_error([] { io::parse_machine("wfsm v2\n"); });
  CHECK(e.line() == 1);
  CHECK(e.column() == 1);

  e = parse_error([] { io::parse_machine("wfsm v1\nstates 1\nsymbols a\n  start 0 x\n"); });
  CHECK(e.line() == 4);
  CHECK(e.column() == 11);

  e = parse_error([] { io::parse_machine("wfsm v1\nstates 1\nfrobnicate\n"); });
  CHECK(e.line() == 3);

  e = parse_error([] { io::parse_machine("wfsm v1\nsymbols a\nstart 0 1\n"); });
  CHECK(e.line() == 4);

  e = parse_error([] { io::parse_machine("wfsm v1\nstates 1 2\n"); });
  CHECK(e.column() == 10);

  CHECK_THROWS_AS(io::parse_machine(""), ParseError);
  CHECK_THROWS_AS(io::parse_machine("wfsm v1\nstates 1\nsymbols a\nstart 0 inf\nend 0 1\n"), ParseError);
}

TEST_CASE("machine round trip is exact") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_machine(1 + seed % 5, 1 + seed % 3, 0.7, seed);
    const auto text = io::serialize_machine(m);
    const auto back = io::parse_machine(text);
    REQUIRE(back.num_symbols() == m.num_symbols());
    CHECK(back.symbols() == m.symbols());
    CHECK(back.start() == m.start());
    CHECK(back.end() == m.end());
    for (std::size_t a = 0; a < m.num_symbols(); ++a) CHECK(back.transition(a) == m.transition(a));
    CHECK(io::serialize_machine(back) == text);
  }
}

TEST_CASE("function round trip and errors") {
  const auto m = random_machine(3, 2, 0.5, 4);
  const auto f = random_function(m.space(), 4, 12, 5);
  const auto back = io::parse_function(io::serialize_function(f, m), m);
  REQUIRE(back.dim() == 4);
  for (std::size_t x = 0; x < m.space().size(); ++x) {
    CHECK(DenseVector(back.value(x)) == DenseVector(f.value(x)));
  }
  CHECK_THROWS_AS(io::parse_function("func v1\ndim 2\nentry 0 0 a 2 1.0\n", m), ValidationError);
  CHECK_THROWS_AS(io::parse_function("func v1\ndim 2\nentry 0 7 a 0 1.0\n", m), ValidationError);
  CHECK_THROWS_AS(io::parse_function("func v1\ndim 2\nentry 0 0 q 0 1.0\n", m), ValidationError);
  CHECK_THROWS_AS(io::parse_function("func v1\ndim 2\nentry 0 0 a 0 1\nentry 0 0 a 0 2\n", m), ValidationError);
  CHECK_THROWS_AS(io::parse_function("func v1\nentry 0 0 a 0 1.0\n", m), ParseError);
  CHECK_THROWS_AS(io::parse_function("func v1\ndim 2\ndim 2\n", m), ParseError);
}

TEST_CASE("number formatting") {
  CHECK(io::format_number(2.0) == "2.0000000000000000");
  CHECK(io::format_number(16.0) == "16.000000000000000");
  CHECK(io::format_number(0.5) == "0.50000000000000000");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 200; ++k) {
    const double x = u(rng) * std::pow(10.0, k % 40 - 20);
    CHECK(io::parse_number(io::format_number(x)) == x);
  }
  CHECK_THROWS_AS(io::parse_number("1.0x"), ParseError);
  CHECK_THROWS_AS(io::parse_number("nan"), ParseError);
}

TEST_CASE("tuples") {
  const auto m = io::parse_machine("wfsm v1\nstates 2\nsymbols a b\nstart 0 1\nend 1 1\narc 0 1 a 0.3\n");
  const auto t = io::parse_tuple("0 1 a; 0 1 b", m);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == Transition{0, 0, 1});
  CHECK(t[1] == Transition{1, 0, 1});
  CHECK_THROWS_AS(io::parse_tuple("", m), ParseError);
  CHECK_THROWS_AS(io::parse_tuple("0 1 a;", m), ParseError);
  CHECK_THROWS_AS(io::parse_tuple("0 1", m), ParseError);
  CHECK_THROWS_AS(io::parse_tuple("0 3 a", m), ParseError);
  auto e = parse_error([&] { io::parse_tuple("0 1 a; 0 1 zz", m); });
  CHECK(e.column() == 12);
}

TEST_CASE("tensor tsv lists one index triple per axis") {
  const auto m = m1();
  const auto h = hessian(build_cache(m));
  std::ostringstream out;
  io::write_tensor_tsv(out, m, h, io::visible_symbols(m));
  CHECK(out.str() == "a\t0\t0\ta\t0\t0\t16.000000000000000\n");
}
